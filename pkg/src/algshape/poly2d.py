"""Bivariate polynomials, coordinate shifts and binary-shape rendering.

A shape is the sublevel set {p <= 0} of a real bivariate polynomial p,
restricted to the square image plane [-L, L]^2.  All modules share a single
coefficient ordering: graded lexicographic, i.e. monomials x^i y^j sorted by
total degree i+j first and by i ascending within a degree, so index 0 is the
constant term.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np


def monomial_exponents(degree: int) -> list[tuple[int, int]]:
    """Exponent pairs (i, j) with i+j <= degree, in canonical order."""
    return [(i, d - i) for d in range(degree + 1) for i in range(d + 1)]


def num_coefficients(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def monomial_index(i: int, j: int) -> int:
    """Position of x^i y^j in the canonical coefficient vector."""
    d = i + j
    return d * (d + 1) // 2 + i


@dataclass(frozen=True)
class BivariatePolynomial:
    """Dense coefficient vector of a degree-n bivariate polynomial.

    The degree is structural: leading coefficients may be zero without
    changing ``degree``.
    """

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if coeffs.shape != (num_coefficients(self.degree),):
            raise ValueError(
                f"expected {num_coefficients(self.degree)} coefficients for "
                f"degree {self.degree}, got {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, x, y):
        return evaluate(self, x, y)

    @staticmethod
    def from_terms(degree: int, terms: dict[tuple[int, int], float]) -> "BivariatePolynomial":
        coeffs = np.zeros(num_coefficients(degree))
        for (i, j), a in terms.items():
            if i + j > degree:
                raise ValueError(f"monomial x^{i}y^{j} exceeds degree {degree}")
            coeffs[monomial_index(i, j)] = a
        return BivariatePolynomial(degree, coeffs)

    def coefficient_grid(self) -> np.ndarray:
        """Coefficients as an (n+1, n+1) array indexed [i, j]."""
        n = self.degree
        grid = np.zeros((n + 1, n + 1))
        for idx, (i, j) in enumerate(monomial_exponents(n)):
            grid[i, j] = self.coeffs[idx]
        return grid

    def to_json_dict(self) -> dict:
        exps = monomial_exponents(self.degree)
        return {
            "degree": self.degree,
            "coeffs": [
                {"i": i, "j": j, "a": float(a)}
                for (i, j), a in zip(exps, self.coeffs)
                if a != 0.0
            ],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "BivariatePolynomial":
        terms = {(t["i"], t["j"]): float(t["a"]) for t in data["coeffs"]}
        return BivariatePolynomial.from_terms(int(data["degree"]), terms)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @staticmethod
    def load(path) -> "BivariatePolynomial":
        with open(path) as fh:
            return BivariatePolynomial.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class ImagePlane:
    """Square image plane [-L, L]^2 with sampling period T."""

    half_width: float
    period: float = 1.0

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.period <= 0:
            raise ValueError("period must be positive")
        ratio = 2 * self.half_width / self.period
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("2L/T must be an integer so the lattice aligns")


@dataclass(frozen=True)
class ShiftMatrix:
    """Linear map sending coefficients a of p to those of p(x+x0, y+y0)."""

    center: tuple[float, float]
    entries: np.ndarray

    def apply(self, p: BivariatePolynomial) -> BivariatePolynomial:
        return BivariatePolynomial(p.degree, self.entries @ p.coeffs)

    def __matmul__(self, a: np.ndarray) -> np.ndarray:
        return self.entries @ a


def evaluate(p: BivariatePolynomial, x, y):
    """Evaluate p at (x, y) via nested Horner recursion.

    Accepts scalars or broadcastable arrays.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = p.coefficient_grid()
    n = p.degree
    # Horner over y with inner Horner over x for each y-slice.
    acc = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for j in range(n, -1, -1):
        cx = np.zeros_like(acc)
        for i in range(n - j, -1, -1):
            cx = cx * x + grid[i, j]
        acc = acc * y + cx
    if acc.shape == ():
        return float(acc)
    return acc


def raster_axes(plane: ImagePlane, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates of the uniform raster over the plane."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    n_px = int(round(2 * plane.half_width * resolution))
    xs = -plane.half_width + (np.arange(n_px) + 0.5) / resolution
    return xs, xs.copy()


def render_shape(p: BivariatePolynomial, plane: ImagePlane, resolution: int) -> np.ndarray:
    """Rasterize the indicator of {p <= 0} at pixel centers.

    Returns a uint8 array indexed [row, col] = [y, x] with y increasing
    along rows.  Pixels with p exactly 0 render as 1 (closed sublevel set).
    """
    xs, ys = raster_axes(plane, resolution)
    vals = evaluate(p, xs[np.newaxis, :], ys[:, np.newaxis])
    return (vals <= 0).astype(np.uint8)


def shift_matrix(n: int, x0: float, y0: float) -> ShiftMatrix:
    """Coefficient map for the translation (x, y) -> (x + x0, y + y0).

    Upper triangular in the canonical ordering with unit diagonal.
    """
    exps = monomial_exponents(n)
    size = len(exps)
    B = np.zeros((size, size))
    for col, (i, j) in enumerate(exps):
        for k in range(i + 1):
            for l in range(j + 1):
                row = monomial_index(k, l)
                B[row, col] = (
                    math.comb(i, k)
                    * math.comb(j, l)
                    * x0 ** (i - k)
                    * y0 ** (j - l)
                )
    return ShiftMatrix((x0, y0), B)


def boundary_points(
    p: BivariatePolynomial,
    plane: ImagePlane,
    grid_n: int = 512,
    bisect_steps: int = 30,
) -> np.ndarray | None:
    """Locate {p = 0} inside the plane by sign-change scan plus bisection.

    Scans a (grid_n+1)^2 corner lattice for sign changes along both axes and
    refines every crossing edge by bisection.  Returns an (N, 2) array of
    boundary points, or None when no sign change is found.
    """
    L = plane.half_width
    ax = np.linspace(-L, L, grid_n + 1)
    vals = evaluate(p, ax[np.newaxis, :], ax[:, np.newaxis])
    inside = vals <= 0

    segs_a = []
    segs_b = []
    # Horizontal edges: sign change between columns.
    change = inside[:, :-1] != inside[:, 1:]
    rr, cc = np.nonzero(change)
    if rr.size:
        segs_a.append(np.stack([ax[cc], ax[rr]], axis=1))
        segs_b.append(np.stack([ax[cc + 1], ax[rr]], axis=1))
    # Vertical edges: sign change between rows.
    change = inside[:-1, :] != inside[1:, :]
    rr, cc = np.nonzero(change)
    if rr.size:
        segs_a.append(np.stack([ax[cc], ax[rr]], axis=1))
        segs_b.append(np.stack([ax[cc], ax[rr + 1]], axis=1))
    if not segs_a:
        return None

    a = np.concatenate(segs_a)
    b = np.concatenate(segs_b)
    fa = evaluate(p, a[:, 0], a[:, 1]) <= 0
    for _ in range(bisect_steps):
        mid = 0.5 * (a + b)
        fm = evaluate(p, mid[:, 0], mid[:, 1]) <= 0
        same = fm == fa
        a = np.where(same[:, None], mid, a)
        b = np.where(same[:, None], b, mid)
    return 0.5 * (a + b)


def zero_set_distance(
    p: BivariatePolynomial,
    q: BivariatePolynomial,
    plane: ImagePlane,
    grid_n: int = 512,
    bisect_steps: int = 30,
) -> float | None:
    """One-sided Hausdorff distance from {p=0} to {q=0} inside the plane.

    Returns None when {p=0} has no sign change on the scan grid (empty
    boundary).  Raises ValueError when q has an empty boundary, since the
    distance to an empty set is undefined.
    """
    from scipy.spatial import cKDTree

    pts_p = boundary_points(p, plane, grid_n, bisect_steps)
    if pts_p is None:
        return None
    pts_q = boundary_points(q, plane, grid_n, bisect_steps)
    if pts_q is None:
        raise ValueError("target polynomial has an empty boundary in the plane")
    dists, _ = cKDTree(pts_q).query(pts_p)
    return float(dists.max())


def write_pgm(raster: np.ndarray, path) -> None:
    """Write a binary raster as a P5 PGM file (0 / 255)."""
    data = (np.asarray(raster, dtype=np.uint8) * 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a P5 PGM file back into a binary raster (nonzero -> 1)."""
    with open(path, "rb") as fh:
        data = fh.read()
    match = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if match is None:
        raise ValueError("not a binary (P5) PGM file")
    w, h, maxval = (int(g) for g in match.groups())
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    start = match.end()
    pixels = np.frombuffer(data[start : start + w * h], dtype=np.uint8).reshape(h, w)
    return (pixels > 0).astype(np.uint8)


def write_raster_csv(raster: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(raster, dtype=int), fmt="%d", delimiter=",")
