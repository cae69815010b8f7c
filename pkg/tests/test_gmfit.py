import numpy as np
import pytest

from algshape.bspline import BSplineKernel
from algshape.gmfit import (
    ENFORCEMENT_STEP,
    GMCoefficients,
    build_gm_objective,
    default_init,
    functional_residual,
    load_asset,
    solve_gm,
)

BUNDLED = [(6, 13), (4, 14), (2, 20), (2, 16), (2, 14), (2, 7)]


@pytest.fixture(scope="module")
def small_problem():
    return build_gm_objective(BSplineKernel(2), 6, 7)


@pytest.fixture(scope="module")
def small_fit(small_problem):
    return solve_gm(small_problem)


class TestObjective:
    def test_hessian_psd(self, small_problem):
        vals = np.linalg.eigvalsh(0.5 * (small_problem.H + small_problem.H.T))
        assert vals.min() >= -1e-9 * vals.max()

    def test_hessian_matches_factor(self, small_problem):
        H2 = small_problem.factor.T @ small_problem.factor
        assert np.allclose(small_problem.H, H2, atol=1e-9 * np.abs(small_problem.H).max())

    def test_quadratic_form_consistency(self, small_problem):
        rng = np.random.default_rng(0)
        u = rng.standard_normal(small_problem.n_vars)
        assert small_problem.objective(u) == pytest.approx(
            float(u @ small_problem.H @ u), rel=1e-9
        )

    def test_center_constraint_layout(self, small_problem):
        # equality row selects c_0^(0) at the window center
        K = small_problem.index_radius
        assert small_problem.E[0, K] == 1.0
        assert np.count_nonzero(small_problem.E) == 1
        assert small_problem.e[0] == 1.0

    def test_objective_matches_functional_quadrature(self):
        # assembled Gram quadratic form vs dense panel quadrature on an
        # arbitrary admissible point
        init = default_init(BSplineKernel(2), 4, 5)
        assert functional_residual(init) == pytest.approx(init.objective, rel=1e-8)

    def test_max_order_validated(self):
        with pytest.raises(ValueError):
            build_gm_objective(BSplineKernel(2), 0, 5)


class TestSolve:
    def test_large_objective_reduction(self, small_problem, small_fit):
        init = default_init(BSplineKernel(2), 6, 7)
        assert small_fit.objective <= 1e-6 * init.objective

    def test_g_nonnegative_on_grid(self, small_problem, small_fit):
        g = small_problem.A @ small_problem.pack(small_fit.c, small_fit.c_tilde)
        assert g.min() >= -1e-8 * g.max()

    def test_g_strictly_positive_inside(self, small_problem, small_fit):
        g = small_problem.A @ small_problem.pack(small_fit.c, small_fit.c_tilde)
        K = small_fit.index_radius
        edge = K + small_problem.kernel.half_support
        t = np.arange(-edge, edge + ENFORCEMENT_STEP / 2, ENFORCEMENT_STEP)
        interior = np.abs(t) <= K
        assert g[interior].min() > 1e-6 * g.max()

    def test_functional_residual_matches(self, small_fit):
        assert functional_residual(small_fit) == pytest.approx(
            small_fit.objective, rel=1e-8
        )

    def test_window_decay(self, small_fit):
        c0 = small_fit.c[0]
        K = small_fit.index_radius
        assert abs(c0[K]) >= 10 * max(abs(c0[0]), abs(c0[-1]))

    def test_center_constraint_held(self, small_fit):
        assert small_fit.c[0][small_fit.index_radius] == pytest.approx(1.0, abs=1e-9)

    def test_wider_window_admits_lower_cost(self, small_fit):
        # zero-padding a fitted window into a wider one preserves feasibility
        # and the objective, so the wider problem's reachable cost is no worse
        wide = build_gm_objective(BSplineKernel(2), 6, 10)
        pad = 10 - small_fit.index_radius
        c = np.pad(small_fit.c, ((0, 0), (pad, pad)))
        ct = np.pad(small_fit.c_tilde, ((0, 0), (pad, pad)))
        u = wide.pack(c, ct)
        assert float((wide.E @ u)[0]) == pytest.approx(1.0)
        assert (wide.A @ u).min() >= -1e-8 * max((wide.A @ u).max(), 1.0)
        assert wide.objective(u) <= small_fit.objective * (1 + 1e-9)

    def test_bad_init_rejected(self, small_problem):
        init = default_init(BSplineKernel(2), 6, 7)
        c = init.c.copy()
        c[0, 7] = 2.0  # violates the unit center constraint
        bad = GMCoefficients(BSplineKernel(2), 6, 7, c, init.c_tilde, 0.0)
        with pytest.raises(ValueError):
            solve_gm(small_problem, init=bad)


class TestGExpansion:
    def test_vanishes_outside_window(self, small_fit):
        g = small_fit.g_expansion()
        edge = small_fit.index_radius + small_fit.kernel.half_support
        x = np.array([-edge - 0.5, edge + 0.5, edge + 3.0])
        assert np.all(g(x) == 0.0)

    def test_center_value_positive(self, small_fit):
        assert float(small_fit.g_expansion()(0.0)) > 0.5


class TestAssets:
    @pytest.mark.parametrize("m,K", BUNDLED)
    def test_bundled_set_loads_and_is_valid(self, m, K):
        coefs = load_asset(m, K)
        assert coefs.kernel.order == m
        assert coefs.index_radius == K
        assert coefs.max_order == 6
        assert coefs.c.shape == (7, 2 * K + 1)
        assert functional_residual(coefs) == pytest.approx(coefs.objective, rel=1e-6)
        # nonnegative window on a dense grid
        edge = K + coefs.kernel.half_support
        x = np.linspace(-edge, edge, 4 * int(edge) + 1)
        g = coefs.g_expansion()(x)
        assert g.min() >= -1e-8 * g.max()

    def test_missing_asset(self):
        with pytest.raises(FileNotFoundError):
            load_asset(8, 99)

    def test_json_roundtrip(self, tmp_path):
        coefs = load_asset(2, 7)
        path = tmp_path / "c.json"
        coefs.save(path)
        back = GMCoefficients.load(path)
        assert np.array_equal(back.c, coefs.c)
        assert np.array_equal(back.c_tilde, coefs.c_tilde)
        assert back.objective == coefs.objective

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            GMCoefficients(BSplineKernel(2), 6, 7, np.zeros((7, 10)), np.zeros((7, 10)), 0.0)
