"""Reconstruction cascade: constrained least squares, sign-constrained QP
and measurement-consistency refinement.

The noiseless path solves the annihilation system directly under the unit
constant-term constraint.  Under noise, sample values close to 0 or 1 pin the
polynomial sign at the corresponding lattice points, and a final
Gauss-Newton loop pushes the forward-sampled reconstruction toward the
observed samples, accepting only improving steps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .annihilate import (
    AnnihilationSystem,
    POLICY_BALANCED,
    build_conventional,
    build_generalized,
    normalize_coordinates,
)
from .bspline import BSplineKernel, ClassicalReproduction, classical_coefficients
from .gmfit import GMCoefficients
from .moments import generalized_moments_from_samples, moments_from_samples
from .poly2d import BivariatePolynomial, monomial_exponents, num_coefficients
from .sampler import SampleGrid, sample_shape, sample_snr


@dataclass(frozen=True)
class SignConstraintSet:
    """Lattice points classified as inside / outside from their sample values."""

    inside: tuple[tuple[int, int], ...]
    outside: tuple[tuple[int, int], ...]
    epsilon: float
    margin: float = 1e-3

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if set(self.inside) & set(self.outside):
            raise ValueError("inside and outside lists overlap")


@dataclass
class LsSolution:
    coeffs: np.ndarray
    residual: float
    normalization_fallback: bool = False


@dataclass
class QpSolution:
    coeffs: np.ndarray
    residual: float
    feasible: bool
    n_constraints: int


@dataclass
class RefineSolution:
    coeffs: np.ndarray
    n_iter: int
    residual_history: list[float]


@dataclass
class RecoveryResult:
    """Per-stage coefficient vectors (global coordinates) and diagnostics."""

    degree: int
    a_ls: np.ndarray
    a_qp: np.ndarray | None
    a_final: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def polynomial(self, stage: str = "final") -> BivariatePolynomial:
        a = {"ls": self.a_ls, "qp": self.a_qp, "final": self.a_final}[stage]
        if a is None:
            raise ValueError(f"stage {stage!r} was not run")
        return BivariatePolynomial(self.degree, a)

    def to_json_dict(self) -> dict:
        return {
            "degree": self.degree,
            "a_ls": self.a_ls.tolist(),
            "a_qp": None if self.a_qp is None else self.a_qp.tolist(),
            "a_final": self.a_final.tolist(),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def solve_ls(system: AnnihilationSystem) -> LsSolution:
    """Minimize ||M a|| subject to a constant term of 1.

    Falls back to the unit-norm smallest singular vector (flagged) when the
    constant-term column carries no information and the null space is
    orthogonal to it.
    """
    M = system.matrix
    if M.size == 0:
        raise ValueError("empty annihilation system")
    col0 = M[:, 0]
    scale = np.linalg.norm(M)
    if np.linalg.norm(col0) <= 1e-14 * scale:
        _, _, vt = np.linalg.svd(M, full_matrices=False)
        v = vt[-1]
        if abs(v[0]) > 1e-10:
            a = v / v[0]
            fallback = False
        else:
            a = v
            fallback = True
        a = system.unscale_solution(a)
        return LsSolution(a, float(np.linalg.norm(M @ v)), fallback)
    rest, *_ = np.linalg.lstsq(M[:, 1:], -col0, rcond=None)
    a_scaled = np.concatenate([[1.0], rest])
    return LsSolution(
        system.unscale_solution(a_scaled), float(np.linalg.norm(M @ a_scaled))
    )


def infer_signs(grid: SampleGrid, epsilon: float, margin: float = 1e-3) -> SignConstraintSet:
    """Classify lattice points by thresholding their sample values."""
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 0.5)")
    inside = []
    outside = []
    for a, k in enumerate(grid.k_values):
        for b, l in enumerate(grid.l_values):
            d = grid.values[a, b]
            if d >= 1 - epsilon:
                inside.append((int(k), int(l)))
            elif d <= epsilon:
                outside.append((int(k), int(l)))
    return SignConstraintSet(tuple(inside), tuple(outside), epsilon, margin)


def _point_rows(system: AnnihilationSystem, points, period: float) -> np.ndarray:
    exps = monomial_exponents(system.degree)
    rows = np.zeros((len(points), len(exps)))
    for r, (k, l) in enumerate(points):
        x, y = system.scale_point(k * period, l * period)
        rows[r] = [x**i * y**j for i, j in exps]
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms == 0, 1.0, norms)


def _solve_convex_qp(Mr, M0, Gr, G0, h, z0):
    """Interior-point solve of min ||M0 + Mr z||^2 s.t. G0 + Gr z >= h.

    Returns None when the solver is unavailable or does not converge.
    """
    try:
        from cvxopt import matrix, solvers
    except ImportError:
        return None
    n = Mr.shape[1]
    P = 2 * Mr.T @ Mr
    P += 1e-10 * np.trace(P) / n * np.eye(n)
    q = 2 * Mr.T @ M0
    try:
        sol = solvers.qp(
            matrix(P),
            matrix(q),
            matrix(-Gr),
            matrix(G0 - h),
            initvals={"x": matrix(z0)},
            options={"show_progress": False, "maxiters": 200},
        )
    except (ValueError, ArithmeticError):
        return None
    if sol["status"] not in ("optimal", "unknown"):
        return None
    z = np.array(sol["x"]).ravel()
    if sol["status"] == "unknown" and float(np.min(G0 + Gr @ z - h)) < -1e-6:
        return None
    return z


def solve_sign_qp(
    system: AnnihilationSystem,
    signs: SignConstraintSet,
    period: float = 1.0,
    a0: float = 1.0,
) -> QpSolution:
    """Minimize ||M a|| under a pinned constant term and inferred sign constraints.

    Inside lattice points force p <= 0, outside points force p >= margin
    (rows unit-normalized).  ``a0`` pins the constant term: +1 when the
    global origin lies outside the shape, -1 when it lies inside (a positive
    constant term is incompatible with an interior origin).  Returns the
    least-squares solution with ``feasible=False`` when the solver cannot
    satisfy the constraints.
    """
    from scipy.optimize import minimize

    ls = solve_ls(system)
    if a0 != 1.0:
        ls = LsSolution(a0 * ls.coeffs, ls.residual, ls.normalization_fallback)
    n_con = len(signs.inside) + len(signs.outside)
    if n_con == 0:
        return QpSolution(ls.coeffs, ls.residual, True, 0)

    M = system.matrix
    rows_in = _point_rows(system, signs.inside, period)
    rows_out = _point_rows(system, signs.outside, period)
    # G a >= h with a = [1, z].
    G = np.concatenate([-rows_in, rows_out]) if rows_in.size and rows_out.size else (
        -rows_in if rows_in.size else rows_out
    )
    h = np.concatenate(
        [np.zeros(len(signs.inside)), np.full(len(signs.outside), signs.margin)]
    )

    M0, Mr = a0 * M[:, 0], M[:, 1:]
    G0, Gr = a0 * G[:, 0], G[:, 1:]

    def fun(z):
        r = M0 + Mr @ z
        return float(r @ r)

    def jac(z):
        return 2 * Mr.T @ (M0 + Mr @ z)

    scale0 = system.unscale_solution(np.ones(M.shape[1]))
    z0 = (ls.coeffs / scale0)[1:]
    if float(np.min(G0 + Gr @ z0 - h)) >= 0:
        # the unconstrained minimizer already satisfies every sign constraint
        return QpSolution(ls.coeffs, ls.residual, True, n_con)
    z = _solve_convex_qp(Mr, M0, Gr, G0, h, z0)
    if z is None:
        cons = {
            "type": "ineq",
            "fun": lambda z: G0 + Gr @ z - h,
            "jac": lambda z: Gr,
        }
        res = minimize(
            fun,
            z0,
            jac=jac,
            constraints=[cons],
            method="SLSQP",
            options={"maxiter": 300, "ftol": 1e-14},
        )
        z = res.x if res.success else None
    if z is None:
        return QpSolution(ls.coeffs, ls.residual, False, n_con)
    a_scaled = np.concatenate([[a0], z])
    viol = float(np.min(G0 + Gr @ z - h))
    feasible = viol > -1e-6
    if not feasible and viol < -1e-3:
        return QpSolution(ls.coeffs, ls.residual, False, n_con)
    return QpSolution(
        system.unscale_solution(a_scaled),
        float(np.linalg.norm(M @ a_scaled)),
        feasible,
        n_con,
    )


@dataclass(frozen=True)
class ForwardModel:
    """Sampling configuration mapping coefficients to a sample vector."""

    degree: int
    kernel: BSplineKernel
    plane: "object"
    k_range: tuple[int, int]
    l_range: tuple[int, int]
    subcells_per_unit: int = 64
    jac_subcells_per_unit: int = 32

    def __call__(self, a: np.ndarray, coarse: bool = False) -> np.ndarray:
        res = self.jac_subcells_per_unit if coarse else self.subcells_per_unit
        grid = sample_shape(
            BivariatePolynomial(self.degree, a),
            self.plane,
            self.kernel,
            self.k_range,
            self.l_range,
            subcells_per_unit=res,
        )
        return grid.values.ravel()

    @staticmethod
    def for_grid(grid: SampleGrid, degree: int, **kwargs) -> "ForwardModel":
        return ForwardModel(
            degree,
            BSplineKernel(grid.kernel_order),
            grid.plane,
            grid.k_range,
            grid.l_range,
            **kwargs,
        )


def refine_consistency(
    a_cur: np.ndarray,
    grid_noisy: SampleGrid,
    forward: ForwardModel,
    max_iter: int = 10,
    fd_step: float = 1e-2,
) -> RefineSolution:
    """Gauss-Newton measurement-consistency refinement.

    Jacobian columns are central finite differences of the forward model at
    reduced quadrature resolution; the pseudo-inverse is truncated at
    1e-8 of the largest singular value.  A step is accepted only when the
    sample residual decreases, halving the step up to five times otherwise.
    """
    d_target = grid_noisy.values.ravel()
    a = np.asarray(a_cur, dtype=float).copy()
    resid = float(np.linalg.norm(d_target - forward(a)))
    history = [resid]
    n = a.size
    fd = fd_step
    it = 0

    def gn_candidate(step_scale):
        J = np.zeros((d_target.size, n))
        for c in range(n):
            step = step_scale * max(1.0, abs(a[c]))
            ap = a.copy()
            ap[c] += step
            am = a.copy()
            am[c] -= step
            J[:, c] = (forward(ap, coarse=True) - forward(am, coarse=True)) / (2 * step)
        r = d_target - forward(a, coarse=True)
        delta = np.linalg.pinv(J, rcond=1e-8) @ r
        best = None
        for k in range(6):
            cand = a + delta / 2**k
            cand_res = float(np.linalg.norm(d_target - forward(cand)))
            if cand_res < resid and (best is None or cand_res < best[0]):
                best = (cand_res, cand)
        return best

    for it in range(1, max_iter + 1):
        best = gn_candidate(fd)
        # a too-coarse difference step can leave the linear regime for small
        # coefficients; shrink it until a descent direction appears
        while best is None and fd > fd_step / 64:
            fd /= 2
            best = gn_candidate(fd)
        if best is None:
            history.append(resid)
            break
        resid, a = best
        history.append(resid)
    return RefineSolution(a, it, history)


@dataclass
class PipelineOptions:
    rs_policy: str = POLICY_BALANCED
    sigma: float | None = None  # None: 1 / half-extent of the coordinates used
    epsilon: float = 0.2
    margin: float = 1e-3
    sign_qp: str = "auto"  # auto | on | off
    consistency: str = "auto"
    max_iter: int = 10
    fd_step: float = 1e-2
    window_stride: int = 1
    subcells_per_unit: int = 64
    jac_subcells_per_unit: int = 32


def _window_centers(grid: SampleGrid, radius: int, stride: int) -> list[tuple[int, int]]:
    k_lo, k_hi = grid.k_range
    l_lo, l_hi = grid.l_range
    ks = range(k_lo + radius, k_hi - radius + 1, stride)
    ls = range(l_lo + radius, l_hi - radius + 1, stride)
    return [(k, l) for k in ks for l in ls]


def build_system(
    grid: SampleGrid,
    n: int,
    mode: str,
    coefs: ClassicalReproduction | GMCoefficients,
    options: PipelineOptions | None = None,
) -> AnnihilationSystem:
    """Moment retrieval plus annihilation assembly for either mode."""
    options = options or PipelineOptions()
    if mode == "conventional":
        max_rs = max(max(r, s) for r, s in _policy_pairs(n, options.rs_policy))
        order = n + max_rs
        if not isinstance(coefs, ClassicalReproduction):
            raise TypeError("conventional mode needs classical reproduction coefficients")
        tab = moments_from_samples(grid, coefs, order, order)
        system = build_conventional(tab, n, options.rs_policy)
        half_extent = grid.plane.half_width
    elif mode == "generalized":
        if not isinstance(coefs, GMCoefficients):
            raise TypeError("generalized mode needs fitted GM coefficients")
        max_rs = max(max(r, s) for r, s in _policy_pairs(n, options.rs_policy))
        order = n + max_rs
        centers = _window_centers(grid, coefs.index_radius, options.window_stride)
        if not centers:
            raise ValueError("no full coefficient window fits inside the sample grid")
        tables = [
            generalized_moments_from_samples(grid, coefs, order, order, c)
            for c in centers
        ]
        T = grid.plane.period
        system = build_generalized(
            tables, n, options.rs_policy, [(k * T, l * T) for k, l in centers]
        )
        half_extent = coefs.index_radius + coefs.kernel.half_support
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sigma = options.sigma if options.sigma is not None else 1.0 / max(half_extent, 1.0)
    if sigma != 1.0:
        system = normalize_coordinates(system, sigma)
    return system


def _policy_pairs(n, policy):
    from .annihilate import rs_pairs

    return rs_pairs(n, policy)


def _orientation(a: np.ndarray, degree: int, signs: SignConstraintSet, period: float) -> float:
    """Sign s in {+1, -1} making {s p <= 0} agree best with the inferred labels."""
    p = BivariatePolynomial(degree, a)
    from .poly2d import evaluate as poly_eval

    score = 0.0
    for k, l in signs.inside:
        score -= float(np.sign(poly_eval(p, k * period, l * period)))
    for k, l in signs.outside:
        score += float(np.sign(poly_eval(p, k * period, l * period)))
    return -1.0 if score < 0 else 1.0


def run_pipeline(
    grid: SampleGrid,
    n: int,
    mode: str,
    coefs: ClassicalReproduction | GMCoefficients | None = None,
    options: PipelineOptions | None = None,
) -> RecoveryResult:
    """Full recovery cascade on a sample grid.

    The sign-constrained QP and the consistency refinement run by default
    only on noisy grids; ``options.sign_qp`` / ``options.consistency`` force
    them on or off.
    """
    options = options or PipelineOptions()
    kernel = BSplineKernel(grid.kernel_order)
    if coefs is None:
        if mode != "conventional":
            raise ValueError("generalized mode requires fitted coefficients")
        max_rs = max(max(r, s) for r, s in _policy_pairs(n, options.rs_policy))
        coefs = classical_coefficients(
            kernel, n + max_rs, (int(grid.k_values[0]), int(grid.k_values[-1]))
        )
    system = build_system(grid, n, mode, coefs, options)

    noisy = grid.noise is not None and not math.isinf(grid.noise.get("snr_db", float("inf")))
    run_qp = options.sign_qp == "on" or (options.sign_qp == "auto" and noisy)
    run_refine = options.consistency == "on" or (options.consistency == "auto" and noisy)

    diagnostics: dict = {"mode": mode, "rs_policy": options.rs_policy, "sigma": system.sigma}
    ls = solve_ls(system)
    signs = infer_signs(grid, options.epsilon, options.margin)
    orient = _orientation(ls.coeffs, n, signs, grid.plane.period)
    a_ls = orient * ls.coeffs
    diagnostics["ls"] = {
        "residual": ls.residual,
        "normalization_fallback": ls.normalization_fallback,
        "orientation": orient,
    }
    a_cur = a_ls
    a_qp = None
    forward = ForwardModel.for_grid(
        grid,
        n,
        subcells_per_unit=options.subcells_per_unit,
        jac_subcells_per_unit=options.jac_subcells_per_unit,
    )
    if run_qp:
        qp = solve_sign_qp(system, signs, grid.plane.period, a0=orient)
        a_qp = qp.coeffs
        a_cur = qp.coeffs
        diagnostics["qp"] = {
            "residual": qp.residual,
            "feasible": qp.feasible,
            "n_constraints": qp.n_constraints,
        }
    if run_refine:
        refined = refine_consistency(
            a_cur, grid, forward, options.max_iter, options.fd_step
        )
        a_final = refined.coeffs
        diagnostics["consistency"] = {
            "n_iter": refined.n_iter,
            "residual_history": refined.residual_history,
        }
    else:
        a_final = a_cur

    for stage, a in (("ls", a_ls), ("qp", a_qp), ("final", a_final)):
        if a is None:
            continue
        diagnostics.setdefault("sample_snr_db", {})[stage] = sample_snr(
            grid.values, forward(a).reshape(grid.values.shape)
        )
    return RecoveryResult(n, a_ls, a_qp, a_final, diagnostics)
