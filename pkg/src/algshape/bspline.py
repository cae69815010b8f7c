"""Centered B-spline kernels, inner products and reproduction coefficients.

The order-m kernel is the (m+1)-fold convolution of the centered box kernel,
a piecewise polynomial of degree m supported on [-(m+1)/2, (m+1)/2] with unit
integral.  Integer shifts of the kernel reproduce monomials up to degree m;
the reproduction coefficients are polynomials in the shift index.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class BSplineKernel:
    """Centered B-spline of a given order."""

    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be non-negative")

    @property
    def half_support(self) -> float:
        return (self.order + 1) / 2

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(kernel: BSplineKernel, x):
    """Kernel value via the closed-form divided-difference expansion."""
    m = kernel.order
    x = np.asarray(x, dtype=float)
    if m == 0:
        inner = (np.abs(x) < 0.5).astype(float)
        edge = np.where(np.abs(x) == 0.5, 0.5, 0.0)
        out = inner + edge
        return float(out) if out.shape == () else out
    t = x + (m + 1) / 2
    acc = np.zeros_like(t)
    for k in range(m + 2):
        term = np.where(t > k, (t - k) ** m, 0.0)
        acc += (-1) ** k * math.comb(m + 1, k) * term
    acc /= math.factorial(m)
    # Clip convolution round-off outside the support.
    acc = np.where((t <= 0) | (t >= m + 1), 0.0, acc)
    return float(acc) if acc.shape == () else acc


def evaluate_derivative(kernel: BSplineKernel, x):
    """Kernel derivative via the order-(m-1) difference identity."""
    m = kernel.order
    if m < 1:
        raise ValueError("the box kernel has no pointwise derivative")
    lower = BSplineKernel(m - 1)
    return evaluate(lower, np.asarray(x, dtype=float) + 0.5) - evaluate(
        lower, np.asarray(x, dtype=float) - 0.5
    )


def _kernel_func(kernel: BSplineKernel, deriv: bool):
    if deriv:
        return lambda u: evaluate_derivative(kernel, u)
    return lambda u: evaluate(kernel, u)


@functools.lru_cache(maxsize=None)
def _base_integral(m: int, t: int, delta: int, d1: bool, d2: bool) -> float:
    """Exact value of the shifted product integral int u^t F1(u) F2(u - delta) du.

    F1, F2 are the order-m kernel or its derivative.  Breakpoints are taken on
    the half-integer grid, a superset of the actual knots, and each piece is
    integrated with a Gauss-Legendre rule exact for its polynomial degree.
    """
    kernel = BSplineKernel(m)
    h = kernel.half_support
    lo = max(-h, delta - h)
    hi = min(h, delta + h)
    if lo >= hi:
        return 0.0
    f1 = _kernel_func(kernel, d1)
    f2 = _kernel_func(kernel, d2)
    breaks = np.arange(math.floor(2 * lo), math.ceil(2 * hi) + 1) / 2
    breaks = np.clip(breaks, lo, hi)
    breaks = np.unique(breaks)
    n_nodes = m + 1 + (t + 1) // 2 + 1
    nodes, weights = leggauss(n_nodes)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a < 1e-14:
            continue
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        u = mid + half * nodes
        total += half * np.sum(weights * u**t * f1(u) * f2(u - delta))
    return float(total)


def gram_integrals(
    kernel: BSplineKernel,
    weight_power: int,
    deriv_flags: tuple[bool, bool],
    k: int,
    l: int,
) -> float:
    """Exact weighted inner product int x^w D^f1 b(x-k) D^f2 b(x-l) dx."""
    if weight_power not in (0, 1, 2):
        raise ValueError("weight_power must be 0, 1 or 2")
    delta = l - k
    if abs(delta) > kernel.order + 1:
        return 0.0
    w = weight_power
    total = 0.0
    for t in range(w + 1):
        total += (
            math.comb(w, t)
            * float(k) ** (w - t)
            * _base_integral(kernel.order, t, delta, deriv_flags[0], deriv_flags[1])
        )
    return total


@dataclass(frozen=True)
class ClassicalReproduction:
    """Coefficient table c_k^(i) reproducing monomials from kernel shifts."""

    kernel: BSplineKernel
    order: int
    k_min: int
    table: np.ndarray  # shape (order + 1, number of shifts)

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_min + self.table.shape[1])

    def row(self, i: int) -> np.ndarray:
        return self.table[i]

    def to_json_dict(self) -> dict:
        return {
            "m": self.kernel.order,
            "N": self.order,
            "k_min": self.k_min,
            "rows": self.table.tolist(),
        }

    @staticmethod
    def from_json_dict(data: dict) -> "ClassicalReproduction":
        return ClassicalReproduction(
            BSplineKernel(int(data["m"])),
            int(data["N"]),
            int(data["k_min"]),
            np.asarray(data["rows"], dtype=float),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)


@functools.lru_cache(maxsize=None)
def _reproduction_polynomials(m: int, order: int) -> tuple[tuple[float, ...], ...]:
    """Coefficients of the degree-i polynomials q_i with sum_k q_i(k) b(x-k) = x^i.

    Solved by collocation on a central interval wide enough that truncating
    the shift sum has no effect there.
    """
    kernel = BSplineKernel(m)
    reach = int(math.ceil(kernel.half_support)) + 2
    ks = np.arange(-reach - 1, reach + 2)
    xs = np.linspace(-1.0, 1.0, 40 * (order + 2) + 1)
    phi = evaluate(kernel, xs[:, None] - ks[None, :])  # (nx, nk)
    polys = []
    for i in range(order + 1):
        # Unknowns: monomial coefficients of q_i; design matrix sums k^s b(x-k).
        A = np.stack([phi @ (ks.astype(float) ** s) for s in range(i + 1)], axis=1)
        alpha, *_ = np.linalg.lstsq(A, xs**i, rcond=None)
        polys.append(tuple(alpha))
    return tuple(polys)


def classical_coefficients(
    kernel: BSplineKernel, order: int, k_range: tuple[int, int]
) -> ClassicalReproduction:
    """Reproduction coefficients c_k^(i), i = 0..order, for shifts in k_range.

    Raises ValueError when the requested order exceeds the kernel order.
    """
    if order > kernel.order:
        raise ValueError(
            f"B-spline of order {kernel.order} reproduces degrees <= {kernel.order}"
        )
    k_min, k_max = k_range
    if k_max < k_min:
        raise ValueError("empty shift range")
    ks = np.arange(k_min, k_max + 1, dtype=float)
    polys = _reproduction_polynomials(kernel.order, order)
    table = np.zeros((order + 1, ks.size))
    for i, alpha in enumerate(polys):
        table[i] = sum(a * ks**s for s, a in enumerate(alpha))
    return ClassicalReproduction(kernel, order, k_min, table)
