"""Moment retrieval from samples and brute-force moment oracles.

Conventional moments come out of samples as a tensor contraction with
classical reproduction coefficients; generalized moments use kernel-adapted
coefficient sets over a finite window.  The oracle computes the same
quantities by direct supersampled quadrature and is used only for testing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bspline import (
    BSplineKernel,
    ClassicalReproduction,
    evaluate as bspline_eval,
    evaluate_derivative as bspline_deriv,
)
from .poly2d import BivariatePolynomial, ImagePlane, evaluate as poly_eval

KIND_CONVENTIONAL = "conventional"
KIND_GG = "g.g"
KIND_GPG = "g'.g"
KIND_GGP = "g.g'"


@dataclass(frozen=True)
class MomentTable:
    """Dense table of moments M_{i,j}, 0 <= i <= max_i, 0 <= j <= max_j."""

    kind: str
    values: np.ndarray
    center: tuple[float, float] = (0.0, 0.0)

    def __getitem__(self, ij: tuple[int, int]) -> float:
        return float(self.values[ij])

    @property
    def max_i(self) -> int:
        return self.values.shape[0] - 1

    @property
    def max_j(self) -> int:
        return self.values.shape[1] - 1

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "max_i": self.max_i,
            "max_j": self.max_j,
            "center": list(self.center),
            "values": self.values.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)


def moments_from_samples(
    grid, repro: ClassicalReproduction, max_i: int, max_j: int
) -> MomentTable:
    """Conventional moments as the contraction sum_kl c_k^(i) c_l^(j) d_kl."""
    if max(max_i, max_j) > repro.order:
        raise ValueError(
            f"moment order {max(max_i, max_j)} exceeds reproduction order {repro.order}"
        )
    Ck = _aligned_rows(repro, grid.k_values, max_i)
    Cl = _aligned_rows(repro, grid.l_values, max_j)
    scale = grid.plane.period ** 2
    values = Ck @ grid.values @ Cl.T * scale
    return MomentTable(KIND_CONVENTIONAL, values)


def _aligned_rows(repro: ClassicalReproduction, k_values: np.ndarray, max_order: int):
    """Coefficient rows aligned with the given lattice indices."""
    k_min = repro.k_min
    k_max = k_min + repro.table.shape[1] - 1
    if k_values[0] < k_min or k_values[-1] > k_max:
        raise ValueError("reproduction table does not cover the sample range")
    sel = slice(int(k_values[0] - k_min), int(k_values[-1] - k_min) + 1)
    return repro.table[: max_order + 1, sel]


def generalized_moments_from_samples(
    grid, coefs, max_i: int, max_j: int, patch_center: tuple[int, int] = (0, 0)
) -> tuple[MomentTable, MomentTable, MomentTable]:
    """Windowed generalized moments (g.g, g'.g, g.g') in window-local coordinates.

    ``coefs`` is a GMCoefficients instance; the window is the block of samples
    with lattice offsets in its index set around ``patch_center``.
    """
    if max(max_i, max_j) > coefs.max_order:
        raise ValueError("moment order exceeds the coefficient set order")
    if coefs.kernel.order != grid.kernel_order:
        raise ValueError("coefficient set was fitted for a different kernel")
    k0, l0 = patch_center
    K = coefs.index_radius
    k_lo, k_hi = k0 - K, k0 + K
    l_lo, l_hi = l0 - K, l0 + K
    if (
        k_lo < grid.k_range[0]
        or k_hi > grid.k_range[1]
        or l_lo < grid.l_range[0]
        or l_hi > grid.l_range[1]
    ):
        raise ValueError("window is not fully inside the sample grid")
    window = grid.values[
        k_lo - grid.k_range[0] : k_hi - grid.k_range[0] + 1,
        l_lo - grid.l_range[0] : l_hi - grid.l_range[0] + 1,
    ]
    C = coefs.c[: max_i + 1]
    Ct = coefs.c_tilde[: max_i + 1]
    Cj = coefs.c[: max_j + 1]
    Ctj = coefs.c_tilde[: max_j + 1]
    scale = grid.plane.period ** 2
    center = (k0 * grid.plane.period, l0 * grid.plane.period)
    gg = MomentTable(KIND_GG, C @ window @ Cj.T * scale, center)
    gpg = MomentTable(KIND_GPG, Ct @ window @ Cj.T * scale, center)
    ggp = MomentTable(KIND_GGP, C @ window @ Ctj.T * scale, center)
    return gg, gpg, ggp


@dataclass(frozen=True)
class GExpansion:
    """Weight g(x) = sum_k c_k b(x - k) given by kernel-shift coefficients."""

    kernel: BSplineKernel
    coefficients: np.ndarray
    k_min: int

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_min + self.coefficients.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return sum(
            c * bspline_eval(self.kernel, x - k)
            for c, k in zip(self.coefficients, self.k_values)
        )

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return sum(
            c * bspline_deriv(self.kernel, x - k)
            for c, k in zip(self.coefficients, self.k_values)
        )


def oracle_moments(
    shape: BivariatePolynomial | np.ndarray,
    plane: ImagePlane,
    max_i: int,
    max_j: int,
    weight: GExpansion | None = None,
    kind: str = KIND_CONVENTIONAL,
    center: tuple[float, float] = (0.0, 0.0),
    resolution: int = 256,
) -> MomentTable:
    """Moments by direct 2D midpoint quadrature (test oracle).

    ``shape`` is a polynomial or a binary raster covering the plane.  With a
    weight, computes generalized moments of the requested kind in coordinates
    local to ``center``.
    """
    if isinstance(shape, BivariatePolynomial):
        n_px = int(round(2 * plane.half_width * resolution))
        xs = -plane.half_width + (np.arange(n_px) + 0.5) / resolution
        indicator = (poly_eval(shape, xs[np.newaxis, :], xs[:, np.newaxis]) <= 0).astype(float)
        step = 1.0 / resolution
    else:
        indicator = np.asarray(shape, dtype=float)
        n_px = indicator.shape[0]
        xs = -plane.half_width + (np.arange(n_px) + 0.5) * (2 * plane.half_width / n_px)
        step = 2 * plane.half_width / n_px

    xloc = xs - center[0]
    yloc = xs - center[1]
    if weight is None:
        wx = np.ones_like(xloc)
        wy = np.ones_like(yloc)
    elif kind == KIND_GG:
        wx, wy = weight(xloc), weight(yloc)
    elif kind == KIND_GPG:
        wx, wy = weight.derivative(xloc), weight(yloc)
    elif kind == KIND_GGP:
        wx, wy = weight(xloc), weight.derivative(yloc)
    else:
        raise ValueError(f"unknown moment kind {kind!r}")

    Ax = np.stack([xloc**i * wx for i in range(max_i + 1)])
    Ay = np.stack([yloc**j * wy for j in range(max_j + 1)])
    values = Ax @ indicator.T @ Ay.T * step**2
    out_kind = KIND_CONVENTIONAL if weight is None else kind
    return MomentTable(out_kind, values, center)
