"""Kernel-adapted coefficient sets for stable generalized moments.

Finds tables {c_k^(i)}, {ct_k^(i)} over a finite shift window such that the
kernel expansions behave like x^i g(x) and x^i g'(x) for an implicit
nonnegative window function g.  The fit minimizes a quadratic functional of
reproduction residuals subject to a unit constraint at the center and
nonnegativity of g on an enforcement grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bspline import BSplineKernel, gram_integrals, evaluate as bspline_eval
from .moments import GExpansion

ENFORCEMENT_STEP = 0.25


@dataclass(frozen=True)
class GMCoefficients:
    """Fitted coefficient tables and the achieved objective value."""

    kernel: BSplineKernel
    max_order: int
    index_radius: int
    c: np.ndarray        # shape (max_order + 1, 2K + 1)
    c_tilde: np.ndarray  # same shape
    objective: float

    def __post_init__(self):
        width = 2 * self.index_radius + 1
        if self.c.shape != (self.max_order + 1, width) or self.c_tilde.shape != self.c.shape:
            raise ValueError("coefficient table shapes inconsistent with declared sizes")

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(-self.index_radius, self.index_radius + 1)

    @property
    def window_size(self) -> int:
        return 2 * self.index_radius + 1

    def g_expansion(self) -> GExpansion:
        return GExpansion(self.kernel, self.c[0].copy(), -self.index_radius)

    def to_json_dict(self) -> dict:
        return {
            "m": self.kernel.order,
            "P": self.max_order,
            "K": self.index_radius,
            "c": self.c.tolist(),
            "c_tilde": self.c_tilde.tolist(),
            "objective": self.objective,
        }

    @staticmethod
    def from_json_dict(data: dict) -> "GMCoefficients":
        return GMCoefficients(
            BSplineKernel(int(data["m"])),
            int(data["P"]),
            int(data["K"]),
            np.asarray(data["c"], dtype=float),
            np.asarray(data["c_tilde"], dtype=float),
            float(data["objective"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @staticmethod
    def load(path) -> "GMCoefficients":
        with open(path) as fh:
            return GMCoefficients.from_json_dict(json.load(fh))


def load_asset(kernel_order: int, index_radius: int, max_order: int = 6) -> GMCoefficients:
    """Load a bundled precomputed coefficient set (see scripts/generate_assets.py)."""
    from importlib import resources

    name = f"gm_m{kernel_order}_P{max_order}_K{index_radius}.json"
    ref = resources.files("algshape.assets").joinpath(name)
    if not ref.is_file():
        raise FileNotFoundError(
            f"no bundled coefficient set {name}; run scripts/generate_assets.py "
            "or fit one with build_gm_objective + solve_gm"
        )
    return GMCoefficients.from_json_dict(json.loads(ref.read_text()))


@dataclass(frozen=True)
class QPProblem:
    """min u'Hu  s.t.  E u = e,  A u >= 0, for the stacked coefficient vector.

    The unknown vector stacks all c rows then all ct rows, row-major over
    orders.  ``factor`` is a matrix F with H = F'F, kept so objectives can be
    evaluated without squaring the condition number.
    """

    kernel: BSplineKernel
    max_order: int
    index_radius: int
    H: np.ndarray
    factor: np.ndarray
    E: np.ndarray
    e: np.ndarray
    A: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.H.shape[0]

    def objective(self, u: np.ndarray) -> float:
        r = self.factor @ u
        return float(r @ r)

    def unpack(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        P, K = self.max_order, self.index_radius
        width = 2 * K + 1
        half = (P + 1) * width
        return u[:half].reshape(P + 1, width), u[half:].reshape(P + 1, width)

    def pack(self, c: np.ndarray, ct: np.ndarray) -> np.ndarray:
        return np.concatenate([c.ravel(), ct.ravel()])


def _basis_gram(kernel: BSplineKernel, K: int) -> np.ndarray:
    """Gram matrix of the 3(2K+1) functions {b_k}, {x b_k}, {b'_k}."""
    width = 2 * K + 1
    ks = np.arange(-K, K + 1)
    G = np.zeros((3 * width, 3 * width))
    specs = [((False, False), 0), ((False, False), 1), ((True, False), 0)]
    # Block (p, q) pairs: weights and derivative flags composed from specs.
    for p in range(3):
        for q in range(3):
            w = (1 if p == 1 else 0) + (1 if q == 1 else 0)
            d1 = p == 2
            d2 = q == 2
            for a, k in enumerate(ks):
                for b, l in enumerate(ks):
                    if abs(l - k) > kernel.order + 1:
                        continue
                    G[p * width + a, q * width + b] = gram_integrals(
                        kernel, w, (d1, d2), int(k), int(l)
                    )
    return G


def _gram_factor(G: np.ndarray) -> np.ndarray:
    """PSD square root C with C'C = G, eigenvalue-clipped at zero."""
    G = 0.5 * (G + G.T)
    vals, vecs = np.linalg.eigh(G)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def build_gm_objective(kernel: BSplineKernel, max_order: int, index_radius: int) -> QPProblem:
    """Assemble the residual quadratic form and the fit constraints.

    Residual groups, for orders i:
      (1) sum_k (c_k^(i) - x c_k^(i-1)) b_k, i = 1..P
      (2) the same for ct,
      (3) sum_k c_k^(i) b'_k - sum_k (i c_k^(i-1) + ct_k^(i)) b_k, i = 0..P.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    P, K = max_order, index_radius
    width = 2 * K + 1
    n_vars = 2 * (P + 1) * width
    n_basis = 3 * width

    G = _basis_gram(kernel, K)
    C = _gram_factor(G)

    def c_slice(i):
        return slice(i * width, (i + 1) * width)

    def ct_slice(i):
        return slice((P + 1 + i) * width, (P + 2 + i) * width)

    # Each residual is S u in the stacked basis [b_k | x b_k | b'_k].
    maps = []
    for i in range(1, P + 1):
        S = np.zeros((n_basis, n_vars))
        S[0:width, c_slice(i)] = np.eye(width)
        S[width : 2 * width, c_slice(i - 1)] = -np.eye(width)
        maps.append(S)
        S = np.zeros((n_basis, n_vars))
        S[0:width, ct_slice(i)] = np.eye(width)
        S[width : 2 * width, ct_slice(i - 1)] = -np.eye(width)
        maps.append(S)
    for i in range(0, P + 1):
        S = np.zeros((n_basis, n_vars))
        S[2 * width : 3 * width, c_slice(i)] = np.eye(width)
        S[0:width, ct_slice(i)] = -np.eye(width)
        if i >= 1:
            S[0:width, c_slice(i - 1)] -= i * np.eye(width)
        maps.append(S)

    factor = np.vstack([C @ S for S in maps])
    H = factor.T @ factor

    E = np.zeros((1, n_vars))
    E[0, K] = 1.0  # c_0^(0), center entry of the order-0 row
    e = np.array([1.0])

    ks = np.arange(-K, K + 1)
    edge = K + kernel.half_support
    t_grid = np.arange(-edge, edge + ENFORCEMENT_STEP / 2, ENFORCEMENT_STEP)
    A = np.zeros((t_grid.size, n_vars))
    A[:, c_slice(0)] = bspline_eval(kernel, t_grid[:, None] - ks[None, :])
    return QPProblem(kernel, P, K, H, factor, E, e, A)


def default_init(kernel: BSplineKernel, max_order: int, index_radius: int) -> GMCoefficients:
    """Raised-cosine bump initialization with recursive higher orders."""
    P, K = max_order, index_radius
    ks = np.arange(-K, K + 1, dtype=float)
    bump = 0.5 * (1 + np.cos(np.pi * ks / (K + 1)))
    bump /= bump[K]
    c = np.zeros((P + 1, ks.size))
    c[0] = bump
    for i in range(1, P + 1):
        c[i] = ks * c[i - 1]
    ct = np.zeros_like(c)
    ct[:, 1:-1] = 0.5 * (c[:, 2:] - c[:, :-2])
    problem = build_gm_objective(kernel, P, K)
    u = problem.pack(c, ct)
    return GMCoefficients(kernel, P, K, c, ct, problem.objective(u))


def _order_scaling(problem: QPProblem) -> np.ndarray:
    """Per-variable scale K^i equalizing magnitudes across orders."""
    P, K = problem.max_order, problem.index_radius
    width = 2 * K + 1
    base = max(float(K), 1.0)
    row = np.concatenate([np.full(width, base**i) for i in range(P + 1)])
    return np.concatenate([row, row])


DEFAULT_TRUNCATION = 1e-4


def solve_gm(
    problem: QPProblem,
    init: GMCoefficients | None = None,
    max_iter: int = 40,
    truncation: float | None = DEFAULT_TRUNCATION,
) -> GMCoefficients:
    """Solve the coefficient fit from an initialization.

    Works on order-rescaled variables, eliminates the equality constraint and
    takes the truncated-spectrum least-squares step from the initial point;
    residual directions with singular values below ``truncation`` times the
    largest stay at their initial values.  The raw quadratic form is highly
    degenerate: its exact minimizer (``truncation=None``) collapses the
    implicit window function to a spike, while the truncated step keeps a
    wide, strictly positive window at a cost many orders below the initial
    one.  Violated nonnegativity rows are then enforced as active equalities
    until the enforcement grid is feasible; the cost never increases across
    those sweeps beyond least-squares tolerance.
    """
    P, K = problem.max_order, problem.index_radius
    if init is None:
        init = default_init(problem.kernel, P, K)
    scale = _order_scaling(problem)
    F = problem.factor * scale[np.newaxis, :]
    A = problem.A * scale[np.newaxis, :]
    idx0 = int(np.argmax(problem.E[0]))  # constrained coordinate
    n = problem.n_vars
    free = np.array([i for i in range(n) if i != idx0])
    u0 = problem.pack(init.c, init.c_tilde) / scale
    if abs(u0[idx0] * scale[idx0] - problem.e[0]) > 1e-9:
        raise ValueError("initialization violates the unit center constraint")

    a_norms = np.linalg.norm(A, axis=1)
    a_norms[a_norms == 0] = 1.0
    penalty = 1e6 * max(np.linalg.norm(F, ord="fro"), 1.0)

    def solve_with_active(active_rows: list[int]) -> np.ndarray:
        blocks = [F]
        rhs = [-(F @ u0)]
        if active_rows:
            Aact = A[active_rows] / a_norms[active_rows, None] * penalty
            blocks.append(Aact)
            rhs.append(-(Aact @ u0))
        M = np.vstack(blocks)[:, free]
        b = np.concatenate(rhs)
        delta, *_ = np.linalg.lstsq(M, b, rcond=truncation)
        u = u0.copy()
        u[free] += delta
        return u

    active: list[int] = []
    u = solve_with_active(active)
    for _ in range(max_iter):
        resid = A @ u
        feas_tol = 1e-10 * max(float(np.max(np.abs(resid))), 1.0)
        violated = np.nonzero(resid < -feas_tol)[0]
        new = [int(r) for r in violated if r not in active]
        if not new:
            break
        new.sort(key=lambda r: resid[r])
        active.extend(new[:8])
        u = solve_with_active(active)
    else:
        if float(np.min(problem.A @ (u * scale))) < -1e-6:
            raise RuntimeError("nonnegativity enforcement did not converge")

    u_full = u * scale
    c, ct = problem.unpack(u_full)
    obj = problem.objective(u_full)
    result = GMCoefficients(problem.kernel, P, K, c, ct, obj)
    if truncation is not None:
        _check_positivity(problem, result)
    return result


def _check_positivity(problem: QPProblem, coefs: GMCoefficients) -> None:
    """Warn when the fitted g is not strictly positive well inside the window."""
    import warnings

    g = problem.A @ problem.pack(coefs.c, coefs.c_tilde)
    g_max = float(np.max(g))
    if g_max <= 0:
        warnings.warn("fitted g is nonpositive everywhere", stacklevel=2)
        return
    K = coefs.index_radius
    edge = K + problem.kernel.half_support
    t_grid = np.arange(-edge, edge + ENFORCEMENT_STEP / 2, ENFORCEMENT_STEP)
    interior = np.abs(t_grid) <= K
    if float(np.min(g[interior])) <= 1e-6 * g_max:
        warnings.warn(
            "fitted g is not strictly positive over the window interior",
            stacklevel=2,
        )


def functional_residual(coefs: GMCoefficients, panel: float = 1e-2, nodes: int = 5) -> float:
    """Objective re-evaluated by dense panel quadrature of the residual functions.

    Independent of the assembled Gram matrices: evaluates the three residual
    function groups pointwise and integrates each panel with a fixed
    Gauss-Legendre rule.
    """
    from numpy.polynomial.legendre import leggauss

    kernel = coefs.kernel
    P, K = coefs.max_order, coefs.index_radius
    ks = coefs.k_values
    edge = K + kernel.half_support
    n_panels = int(np.ceil(2 * edge / panel))
    gl_x, gl_w = leggauss(nodes)
    starts = -edge + np.arange(n_panels) * panel
    half = panel / 2
    x = (starts[:, None] + half + half * gl_x[None, :]).ravel()
    w = np.tile(gl_w * half, n_panels)

    from .bspline import evaluate_derivative

    phi = bspline_eval(kernel, x[:, None] - ks[None, :])
    dphi = evaluate_derivative(kernel, x[:, None] - ks[None, :])

    total = 0.0
    for i in range(1, P + 1):
        r = phi @ coefs.c[i] - x * (phi @ coefs.c[i - 1])
        total += float(np.sum(w * r**2))
        r = phi @ coefs.c_tilde[i] - x * (phi @ coefs.c_tilde[i - 1])
        total += float(np.sum(w * r**2))
    for i in range(0, P + 1):
        r = dphi @ coefs.c[i] - phi @ coefs.c_tilde[i]
        if i >= 1:
            r -= i * (phi @ coefs.c[i - 1])
        total += float(np.sum(w * r**2))
    return total
