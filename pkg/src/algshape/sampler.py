"""Forward sampling of binary shapes through separable B-spline kernels.

Samples are area integrals of the indicator image against shifted kernel
tensor products, evaluated by supersampled midpoint quadrature on a uniform
sub-cell grid over the image plane.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .bspline import BSplineKernel, evaluate as bspline_eval
from .poly2d import BivariatePolynomial, ImagePlane, evaluate as poly_eval

DEFAULT_SUBCELLS = 64


@dataclass(frozen=True)
class SampleGrid:
    """Kernel samples d_{k,l} on an integer lattice.

    ``values`` is indexed [k, l] with k the x-lattice index.
    """

    values: np.ndarray
    k_range: tuple[int, int]
    l_range: tuple[int, int]
    kernel_order: int
    plane: ImagePlane
    noise: dict | None = None

    def __post_init__(self):
        nk = self.k_range[1] - self.k_range[0] + 1
        nl = self.l_range[1] - self.l_range[0] + 1
        if self.values.shape != (nk, nl):
            raise ValueError(
                f"values shape {self.values.shape} does not match index "
                f"ranges ({nk}, {nl})"
            )

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(self.k_range[0], self.k_range[1] + 1)

    @property
    def l_values(self) -> np.ndarray:
        return np.arange(self.l_range[0], self.l_range[1] + 1)

    def save(self, csv_path, sidecar_path) -> None:
        np.savetxt(csv_path, self.values, delimiter=",")
        meta = {
            "k_range": list(self.k_range),
            "l_range": list(self.l_range),
            "m": self.kernel_order,
            "L": self.plane.half_width,
            "T": self.plane.period,
            "noise": self.noise,
        }
        with open(sidecar_path, "w") as fh:
            json.dump(meta, fh, indent=2)

    @staticmethod
    def load(csv_path, sidecar_path) -> "SampleGrid":
        values = np.atleast_2d(np.loadtxt(csv_path, delimiter=","))
        with open(sidecar_path) as fh:
            meta = json.load(fh)
        return SampleGrid(
            values,
            tuple(meta["k_range"]),
            tuple(meta["l_range"]),
            int(meta["m"]),
            ImagePlane(float(meta["L"]), float(meta["T"])),
            meta.get("noise"),
        )


def default_index_range(plane: ImagePlane, kernel: BSplineKernel) -> tuple[int, int]:
    """Lattice indices whose kernel support intersects the open plane."""
    bound = plane.half_width / plane.period + kernel.half_support
    # Largest integer strictly below the bound (open supports, open plane).
    k_max = int(math.ceil(bound)) - 1
    return (-k_max, k_max)


def _quadrature_axis(plane: ImagePlane, subcells_per_unit: int) -> np.ndarray:
    L = plane.half_width
    n = int(round(2 * L * subcells_per_unit))
    return -L + (np.arange(n) + 0.5) / subcells_per_unit


def _kernel_weights(
    plane: ImagePlane, kernel: BSplineKernel, ks: np.ndarray, xs: np.ndarray
) -> np.ndarray:
    T = plane.period
    return bspline_eval(kernel, xs[np.newaxis, :] / T - ks[:, np.newaxis])


def sample_indicator(
    indicator: np.ndarray,
    plane: ImagePlane,
    kernel: BSplineKernel,
    k_range: tuple[int, int],
    l_range: tuple[int, int],
    subcells_per_unit: int = DEFAULT_SUBCELLS,
) -> np.ndarray:
    """Sample a precomputed indicator grid (indexed [y, x]) through the kernel."""
    xs = _quadrature_axis(plane, subcells_per_unit)
    ks = np.arange(k_range[0], k_range[1] + 1)
    ls = np.arange(l_range[0], l_range[1] + 1)
    Wx = _kernel_weights(plane, kernel, ks, xs)
    Wy = _kernel_weights(plane, kernel, ls, xs)
    cell = (1.0 / subcells_per_unit) ** 2
    # d_{k,l} = (1/T^2) sum_cells I * phi_k(x) * phi_l(y) * cell_area
    values = Wx @ indicator.T @ Wy.T * cell / plane.period**2
    return values


def sample_shape(
    p: BivariatePolynomial,
    plane: ImagePlane,
    kernel: BSplineKernel,
    k_range: tuple[int, int] | None = None,
    l_range: tuple[int, int] | None = None,
    subcells_per_unit: int = DEFAULT_SUBCELLS,
) -> SampleGrid:
    """Generate noiseless samples of the shape {p <= 0} over the plane."""
    if k_range is None:
        k_range = default_index_range(plane, kernel)
    if l_range is None:
        l_range = k_range
    xs = _quadrature_axis(plane, subcells_per_unit)
    indicator = (poly_eval(p, xs[np.newaxis, :], xs[:, np.newaxis]) <= 0).astype(float)
    values = sample_indicator(indicator, plane, kernel, k_range, l_range, subcells_per_unit)
    return SampleGrid(values, k_range, l_range, kernel.order, plane)


def sample_raster(
    raster: np.ndarray,
    plane: ImagePlane,
    kernel: BSplineKernel,
    k_range: tuple[int, int] | None = None,
    l_range: tuple[int, int] | None = None,
) -> SampleGrid:
    """Sample a binary raster (indexed [y, x], covering the plane) directly.

    The raster resolution fixes the quadrature resolution.
    """
    if k_range is None:
        k_range = default_index_range(plane, kernel)
    if l_range is None:
        l_range = k_range
    n = raster.shape[0]
    if raster.shape[0] != raster.shape[1]:
        raise ValueError("raster must be square")
    subcells = n / (2 * plane.half_width)
    if abs(subcells - round(subcells)) > 1e-9:
        raise ValueError("raster size must be a multiple of the plane width")
    values = sample_indicator(
        raster.astype(float), plane, kernel, k_range, l_range, int(round(subcells))
    )
    return SampleGrid(values, k_range, l_range, kernel.order, plane)


def add_noise(grid: SampleGrid, snr_db: float, seed: int) -> SampleGrid:
    """Add i.i.d. Gaussian noise rescaled so the realized SNR is exact."""
    if grid.noise is not None:
        raise ValueError("grid already carries noise")
    if math.isinf(snr_db):
        return replace(grid, noise={"snr_db": float("inf"), "seed": int(seed)})
    signal_energy = float(np.sum(grid.values**2))
    if signal_energy == 0.0:
        raise ValueError("SNR undefined for an all-zero grid")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.values.shape)
    noise_energy = float(np.sum(noise**2))
    scale = math.sqrt(signal_energy / noise_energy * 10 ** (-snr_db / 10))
    return replace(
        grid,
        values=grid.values + scale * noise,
        noise={"snr_db": float(snr_db), "seed": int(seed)},
    )


def sample_snr(reference: SampleGrid | np.ndarray, test: SampleGrid | np.ndarray) -> float:
    """SNR in dB of ``test`` against ``reference``; +inf for identical grids."""
    ref = reference.values if isinstance(reference, SampleGrid) else np.asarray(reference)
    tst = test.values if isinstance(test, SampleGrid) else np.asarray(test)
    if ref.shape != tst.shape:
        raise ValueError("sample grids must share index ranges")
    err = float(np.sum((ref - tst) ** 2))
    if err == 0.0:
        return float("inf")
    return 10 * math.log10(float(np.sum(ref**2)) / err)
