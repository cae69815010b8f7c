import numpy as np
import pytest

from algshape.poly2d import (
    ImagePlane,
    evaluate,
    monomial_exponents,
    render_shape,
)
from algshape.shapegen import (
    gen_bezier_shape,
    gen_bounded_quartic,
    gen_conic,
    gen_unbounded_quartic,
    polyline_area,
    rasterize_polyline,
)


class TestConic:
    def test_unit_circle(self, unit_circle):
        p = gen_conic()
        assert np.allclose(p.coeffs, unit_circle.coeffs, atol=1e-12)

    def test_ellipse_boundary_vanishes(self):
        center, axes, angle = (0.8, -0.5), (1.4, 0.6), 0.5
        p = gen_conic(center, axes, angle)
        theta = np.linspace(0, 2 * np.pi, 100)
        c, s = np.cos(angle), np.sin(angle)
        bx = axes[0] * np.cos(theta)
        by = axes[1] * np.sin(theta)
        x = center[0] + c * bx - s * by
        y = center[1] + s * bx + c * by
        assert np.abs(evaluate(p, x, y)).max() < 1e-9

    def test_interior_sign(self):
        p = gen_conic((1.0, 1.0), (2.0, 1.0))
        assert evaluate(p, 1.0, 1.0) < 0
        assert evaluate(p, 5.0, 5.0) > 0

    def test_invalid_axes(self):
        with pytest.raises(ValueError):
            gen_conic(axes=(0.0, 1.0))


class TestBoundedQuartic:
    @pytest.mark.parametrize("seed", range(5))
    def test_bounded_and_nonempty(self, seed):
        L = 2.0
        p = gen_bounded_quartic(seed, L)
        assert p.degree == 4
        plane = ImagePlane(L, 1.0)
        raster = render_shape(p, plane, 128)
        assert raster.any()
        # strictly inside: no contact with the plane border
        assert not raster[0, :].any() and not raster[-1, :].any()
        assert not raster[:, 0].any() and not raster[:, -1].any()

    @pytest.mark.parametrize("seed", [0, 3])
    def test_leading_form_positive(self, seed):
        p = gen_bounded_quartic(seed, 1.0)
        theta = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        u, v = np.cos(theta), np.sin(theta)
        lead = sum(
            c * u**i * v**j
            for c, (i, j) in zip(p.coeffs, monomial_exponents(4))
            if i + j == 4
        )
        assert lead.min() > 0

    def test_deterministic(self):
        a = gen_bounded_quartic(7, 2.0)
        b = gen_bounded_quartic(7, 2.0)
        assert np.array_equal(a.coeffs, b.coeffs)


class TestUnboundedQuartic:
    def test_crosses_plane_border(self):
        L = 18.0
        p = gen_unbounded_quartic(1, L)
        assert p.degree == 4
        raster = render_shape(p, ImagePlane(L, 1.0), 16)
        # the sublevel region enters from the left and right borders
        assert raster[:, 0].any() and raster[:, -1].any()
        frac = raster.mean()
        assert 0.05 < frac < 0.95

    def test_deterministic(self):
        a = gen_unbounded_quartic(3, 18.0)
        b = gen_unbounded_quartic(3, 18.0)
        assert np.array_equal(a.coeffs, b.coeffs)


SPLINE_FIXTURE = [(-2.0, -1.5), (2.2, -1.8), (1.8, 2.0), (-1.7, 1.6)]


class TestSplineShapes:
    def test_fixture_raster_consistent_with_area(self):
        plane = ImagePlane(6.0, 1.0)
        raster, poly = gen_bezier_shape(SPLINE_FIXTURE, plane, 64)
        pixel_area = raster.sum() / 64**2
        assert pixel_area == pytest.approx(polyline_area(poly), rel=2e-2)

    def test_boundary_closed(self):
        plane = ImagePlane(6.0, 1.0)
        _, poly = gen_bezier_shape(SPLINE_FIXTURE, plane, 64)
        gap = np.linalg.norm(poly[0] - poly[-1])
        seg = np.linalg.norm(np.diff(poly, axis=0), axis=1).max()
        assert gap <= 2 * seg

    def test_degenerate_points_rejected(self):
        plane = ImagePlane(6.0, 1.0)
        with pytest.raises(ValueError):
            gen_bezier_shape([(0.0, 0.0)] * 4, plane)

    def test_self_intersection_rejected(self):
        plane = ImagePlane(6.0, 1.0)
        bowtie = [(-2.0, -2.0), (2.0, 2.0), (2.0, -2.0), (-2.0, 2.0)]
        with pytest.raises(ValueError):
            gen_bezier_shape(bowtie, plane)

    def test_out_of_plane_rejected(self):
        plane = ImagePlane(1.0, 1.0)
        with pytest.raises(ValueError):
            gen_bezier_shape(SPLINE_FIXTURE, plane)

    def test_wrong_point_count(self):
        plane = ImagePlane(6.0, 1.0)
        with pytest.raises(ValueError):
            gen_bezier_shape([(0, 0), (1, 0), (1, 1)], plane)

    def test_shoelace_square(self):
        square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
        assert polyline_area(square) == pytest.approx(4.0)

    def test_rasterize_square(self):
        plane = ImagePlane(2.0, 1.0)
        square = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
        raster = rasterize_polyline(square, plane, 32)
        assert raster.sum() / 32**2 == pytest.approx(4.0, rel=5e-2)
