"""Test-shape generators: bounded quartics, conics, unbounded quartics and
closed spline-boundary (non-algebraic) shapes.

Bounded quartics use a sum-of-squares leading form q1^2 + q2^2 +
eta (x^4 + y^4), a sufficient condition for bounded sublevel sets; the
constant term is adjusted and the result verified by direction sampling and
a render check, with rejection resampling.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .poly2d import (
    BivariatePolynomial,
    ImagePlane,
    evaluate as poly_eval,
    monomial_exponents,
    render_shape,
)

DIRECTION_COUNT = 720
MAX_TRIES = 100


def _grid_to_coeffs(grid: np.ndarray, degree: int) -> np.ndarray:
    """Coefficient grid [i, j] -> canonical graded-lex vector."""
    return np.array([grid[i, j] for i, j in monomial_exponents(degree)])


def _poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Multiply two polynomials given as coefficient grids [i, j]."""
    return convolve2d(a, b)


def _linear_grid(c0: float, cx: float, cy: float) -> np.ndarray:
    return np.array([[c0, cy], [cx, 0.0]])


def gen_conic(
    center: tuple[float, float] = (0.0, 0.0),
    axes: tuple[float, float] = (1.0, 1.0),
    angle: float = 0.0,
) -> BivariatePolynomial:
    """Degree-2 polynomial whose zero set is the given ellipse."""
    a, b = axes
    if a <= 0 or b <= 0:
        raise ValueError("axes must be positive")
    cx, cy = center
    ct, st = np.cos(angle), np.sin(angle)
    # x' = (ct (x-cx) + st (y-cy)) / a ; y' = (-st (x-cx) + ct (y-cy)) / b
    xp = _linear_grid((-ct * cx - st * cy) / a, ct / a, st / a)
    yp = _linear_grid((st * cx - ct * cy) / b, -st / b, ct / b)
    grid = _poly_mul(xp, xp) + _poly_mul(yp, yp)
    grid[0, 0] -= 1.0
    return BivariatePolynomial(2, _grid_to_coeffs(grid, 2))


def _scale_coefficients(coeffs: np.ndarray, degree: int, s: float) -> np.ndarray:
    """Coefficients of p(x / s, y / s) given those of p."""
    return np.array(
        [c / s ** (i + j) for c, (i, j) in zip(coeffs, monomial_exponents(degree))]
    )


def _leading_form_min(p: BivariatePolynomial) -> float:
    """Minimum of the top-degree form over sampled unit directions."""
    theta = np.linspace(0.0, 2 * np.pi, DIRECTION_COUNT, endpoint=False)
    u, v = np.cos(theta), np.sin(theta)
    n = p.degree
    total = np.zeros_like(u)
    for c, (i, j) in zip(p.coeffs, monomial_exponents(n)):
        if i + j == n:
            total += c * u**i * v**j
    return float(total.min())


def _touches_border(mask: np.ndarray) -> bool:
    return bool(
        mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any()
    )


def gen_bounded_quartic(
    seed: int, half_width: float = 1.0, scale: float = 0.6
) -> BivariatePolynomial:
    """Random degree-4 polynomial with a nonempty sublevel set strictly
    inside the square of the given half width.

    The shape is built in unit coordinates and then rescaled so it fits in
    [-scale*half_width, scale*half_width]^2; rejection-resamples (up to 100
    tries) if the sublevel set is empty or reaches the border.
    """
    rng = np.random.default_rng(seed)
    grid_axis = np.linspace(-1.0, 1.0, 192)
    X = grid_axis[np.newaxis, :]
    Y = grid_axis[:, np.newaxis]
    for _ in range(MAX_TRIES):
        g1 = np.zeros((3, 3))
        g2 = np.zeros((3, 3))
        # random homogeneous quadratics A x^2 + B xy + C y^2
        g1[2, 0], g1[1, 1], g1[0, 2] = rng.standard_normal(3)
        g2[2, 0], g2[1, 1], g2[0, 2] = rng.standard_normal(3)
        eta = 0.2 + 0.6 * rng.random()
        lead = _poly_mul(g1, g1) + _poly_mul(g2, g2)
        lead[4, 0] += eta
        lead[0, 4] += eta
        grid = lead.copy()
        # lower-order perturbation
        for i, j in monomial_exponents(3):
            grid[i, j] += 0.4 * rng.standard_normal()
        p0 = BivariatePolynomial(4, _grid_to_coeffs(grid, 4))
        vals = poly_eval(p0, X, Y)
        core = vals[(np.abs(X) <= 0.45) & (np.abs(Y) <= 0.45)]
        depth = 0.35 * (core.max() - core.min()) + 1e-6
        grid[0, 0] -= core.min() + depth
        p_unit = BivariatePolynomial(4, _grid_to_coeffs(grid, 4))
        mask = poly_eval(p_unit, X, Y) <= 0
        if not mask.any() or _touches_border(mask):
            continue
        if _leading_form_min(p_unit) <= 0:
            continue
        s = scale * half_width
        p = BivariatePolynomial(4, _scale_coefficients(p_unit.coeffs, 4, s))
        plane = ImagePlane(half_width, 1.0) if float(half_width).is_integer() else None
        if plane is not None:
            raster = render_shape(p, plane, resolution=128)
            if not raster.any() or _touches_border(raster):
                continue
        return p
    raise RuntimeError("could not generate a bounded quartic in 100 tries")


def gen_unbounded_quartic(seed: int, half_width: float = 1.0) -> BivariatePolynomial:
    """Degree-4 polynomial whose sublevel set is a half-plane-like region.

    The zero set inside the plane is a single curved boundary crossing the
    left and right borders; the shape does not vanish at the plane border.
    The polynomial is (y - c1(x)) (y - c2(x)) with quadratic c1, c2 and c2
    pushed far below the plane, so only c1's branch is visible.
    """
    rng = np.random.default_rng(seed)
    L = half_width
    a0 = 0.25 * L * rng.uniform(-1, 1)
    a1 = 0.3 * rng.uniform(-1, 1)
    a2 = (0.3 / L) * rng.uniform(-1, 1)
    offset = 6 * L * (1 + abs(a1) + abs(a2) * L)
    c1 = np.array([[a0], [a1], [a2]])  # grid [i, 0] in x only
    f1 = np.zeros((3, 2))
    f1[:, 0] = -c1[:, 0]
    f1[0, 1] = 1.0  # y - c1(x)
    f2 = f1.copy()
    f2[0, 0] += offset  # y - c1(x) + offset = y - c2(x)
    grid = _poly_mul(f1, f2)
    full = np.zeros((5, 5))
    full[: grid.shape[0], : grid.shape[1]] = grid
    return BivariatePolynomial(4, _grid_to_coeffs(full, 4))


def _periodic_spline_polyline(points: np.ndarray, n_segments: int = 1024) -> np.ndarray:
    """Closed uniform cubic B-spline through the cyclic control points."""
    basis = (
        np.array(
            [[-1, 3, -3, 1], [3, -6, 3, 0], [-3, 0, 3, 0], [1, 4, 1, 0]], dtype=float
        )
        / 6.0
    )
    n = len(points)
    per_seg = n_segments // n
    ts = np.arange(per_seg) / per_seg
    T = np.stack([ts**3, ts**2, ts, np.ones_like(ts)], axis=1)  # (per_seg, 4)
    out = []
    for i in range(n):
        ctrl = points[[(i - 1) % n, i, (i + 1) % n, (i + 2) % n]]
        out.append(T @ basis @ ctrl)
    return np.concatenate(out)


def _segments_self_intersect(poly: np.ndarray) -> bool:
    """Check a closed polyline for self-intersections (non-adjacent segments)."""
    n = len(poly)
    p = poly
    q = np.roll(poly, -1, axis=0)
    d = q - p
    for i in range(n - 2):
        js = np.arange(i + 2, n if i > 0 else n - 1)
        r = d[i]
        s = d[js]
        qp = p[js] - p[i]
        denom = r[0] * s[:, 1] - r[1] * s[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
            u = (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / denom
        hit = (denom != 0) & (t > 1e-12) & (t < 1 - 1e-12) & (u > 1e-12) & (u < 1 - 1e-12)
        if hit.any():
            return True
    return False


def polyline_area(poly: np.ndarray) -> float:
    """Shoelace area of a closed polyline."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def rasterize_polyline(
    poly: np.ndarray, plane: ImagePlane, resolution: int = 256
) -> np.ndarray:
    """Even-odd scanline fill of a closed polyline, indexed [y, x]."""
    L = plane.half_width
    n_px = int(round(2 * L * resolution))
    xs = -L + (np.arange(n_px) + 0.5) / resolution
    raster = np.zeros((n_px, n_px), dtype=np.uint8)
    p = poly
    q = np.roll(poly, -1, axis=0)
    for row, y in enumerate(xs):
        crossing = (p[:, 1] <= y) != (q[:, 1] <= y)
        if not crossing.any():
            continue
        pc, qc = p[crossing], q[crossing]
        t = (y - pc[:, 1]) / (qc[:, 1] - pc[:, 1])
        x_cross = np.sort(pc[:, 0] + t * (qc[:, 0] - pc[:, 0]))
        for lo, hi in zip(x_cross[0::2], x_cross[1::2]):
            raster[row, (xs >= lo) & (xs < hi)] = 1
    return raster


def gen_bezier_shape(
    control_points, plane: ImagePlane, resolution: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Raster and boundary polyline of a closed spline through 4 control points.

    The boundary is a closed uniform cubic B-spline driven by the four
    control points (closed by construction).  Degenerate or self-intersecting
    boundaries are rejected.
    """
    points = np.asarray(control_points, dtype=float)
    if points.shape != (4, 2):
        raise ValueError("expected exactly 4 control points")
    if np.allclose(points, points[0]):
        raise ValueError("degenerate control points")
    poly = _periodic_spline_polyline(points)
    if polyline_area(poly) < 1e-12:
        raise ValueError("degenerate control points")
    if _segments_self_intersect(poly):
        raise ValueError("self-intersecting boundary")
    if np.abs(poly).max() >= plane.half_width:
        raise ValueError("boundary leaves the image plane")
    return rasterize_polyline(poly, plane, resolution), poly
