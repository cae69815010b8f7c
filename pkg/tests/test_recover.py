import json

import numpy as np
import pytest

from algshape.annihilate import (
    POLICY_BALANCED,
    AnnihilationSystem,
    build_conventional,
    normalize_coordinates,
)
from algshape.bspline import BSplineKernel
from algshape.gmfit import load_asset
from algshape.poly2d import BivariatePolynomial, ImagePlane, evaluate, zero_set_distance
from algshape.recover import (
    ForwardModel,
    PipelineOptions,
    RecoveryResult,
    SignConstraintSet,
    build_system,
    infer_signs,
    refine_consistency,
    run_pipeline,
    solve_ls,
    solve_sign_qp,
)
from algshape.sampler import add_noise, sample_shape

from conftest import circle_poly
from test_annihilate import disk_moment_table


def wrap_system(matrix, degree=2):
    return AnnihilationSystem(matrix, degree, "conventional", POLICY_BALANCED, ())


class TestLeastSquares:
    def test_exact_circle_from_analytic_moments(self, unit_circle, plane_l2):
        system = build_conventional(disk_moment_table(3), 2)
        ls = solve_ls(system)
        rec = BivariatePolynomial(2, ls.coeffs)
        assert zero_set_distance(unit_circle, rec, plane_l2) < 1e-6
        assert ls.residual < 1e-10
        assert not ls.normalization_fallback

    def test_recovers_unique_null_vector(self):
        rng = np.random.default_rng(2)
        v = rng.standard_normal(6)
        v[0] = 1.7
        P = np.eye(6) - np.outer(v, v) / (v @ v)
        M = rng.standard_normal((10, 6)) @ P  # null space is span{v}
        ls = solve_ls(wrap_system(M))
        assert np.allclose(ls.coeffs, v / v[0], atol=1e-8)

    def test_dead_constant_column_still_solved(self):
        # when the constant column carries no information the solver must
        # return a null vector anyway, flagging it if it cannot be normalized
        rng = np.random.default_rng(4)
        M = rng.standard_normal((10, 6))
        M[:, 0] = 0.0
        M[:, 5] = 0.0
        ls = solve_ls(wrap_system(M))
        assert np.linalg.norm(M @ ls.coeffs) < 1e-8 * np.linalg.norm(M)
        if ls.normalization_fallback:
            assert np.linalg.norm(ls.coeffs) == pytest.approx(1.0, abs=1e-9)
        else:
            assert ls.coeffs[0] == pytest.approx(1.0)

    def test_unscaling_applied(self):
        system = normalize_coordinates(build_conventional(disk_moment_table(3), 2), 0.5)
        ls = solve_ls(system)
        rec = BivariatePolynomial(2, ls.coeffs)
        plane = ImagePlane(2.0, 1.0)
        assert zero_set_distance(circle_poly(1.0), rec, plane) < 1e-6

    def test_empty_system(self):
        with pytest.raises(ValueError):
            solve_ls(wrap_system(np.zeros((0, 6))))


class TestSignInference:
    @pytest.fixture(scope="class")
    @staticmethod
    def disk_grid():
        return sample_shape(circle_poly(1.5), ImagePlane(3.0, 1.0), BSplineKernel(6))

    def test_labels_consistent_with_shape(self, disk_grid):
        signs = infer_signs(disk_grid, 0.2)
        p = circle_poly(1.5)
        assert signs.inside  # origin region is deep inside
        assert signs.outside
        for k, l in signs.inside:
            assert evaluate(p, float(k), float(l)) <= 0
        for k, l in signs.outside:
            assert evaluate(p, float(k), float(l)) > 0

    def test_epsilon_range_validated(self, disk_grid):
        for eps in (0.0, 0.5, -0.1):
            with pytest.raises(ValueError):
                infer_signs(disk_grid, eps)

    def test_margin_validated(self):
        with pytest.raises(ValueError):
            SignConstraintSet((), (), 0.2, margin=0.0)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            SignConstraintSet(((0, 0),), ((0, 0),), 0.2)


class TestSignQP:
    def test_no_constraints_returns_ls(self):
        system = build_conventional(disk_moment_table(3), 2)
        empty = SignConstraintSet((), (), 0.2)
        qp = solve_sign_qp(system, empty)
        ls = solve_ls(system)
        assert qp.feasible
        assert qp.n_constraints == 0
        assert np.allclose(qp.coeffs, ls.coeffs)

    def test_noiseless_constraints_satisfied(self):
        shape = circle_poly(1.5)
        grid = sample_shape(shape, ImagePlane(3.0, 1.0), BSplineKernel(6))
        system = build_system(grid, 2, "conventional",
                              __import__("algshape.bspline", fromlist=["x"]).classical_coefficients(
                                  BSplineKernel(6), 3,
                                  (int(grid.k_values[0]), int(grid.k_values[-1]))))
        signs = infer_signs(grid, 0.2)
        qp = solve_sign_qp(system, signs, a0=-1.0)  # origin inside the disk
        assert qp.feasible
        p = BivariatePolynomial(2, qp.coeffs)
        for k, l in signs.inside:
            assert evaluate(p, float(k), float(l)) <= 1e-6
        for k, l in signs.outside:
            assert evaluate(p, float(k), float(l)) >= -1e-6
        plane = ImagePlane(3.0, 1.0)
        assert zero_set_distance(shape, p, plane) < 1e-2

    def test_infeasible_falls_back_to_ls(self):
        system = build_conventional(disk_moment_table(3), 2)
        # contradictory labels on the same axis make the QP infeasible
        signs = SignConstraintSet(((2, 0), (-2, 0)), ((1, 0), (-1, 0), (0, 0)), 0.2)
        qp = solve_sign_qp(system, signs, a0=-1.0)
        ls = solve_ls(system)
        if not qp.feasible:
            assert np.allclose(qp.coeffs, -ls.coeffs)


class TestForwardModel:
    def test_matches_sampling(self, unit_circle, plane_l2):
        grid = sample_shape(unit_circle, plane_l2, BSplineKernel(2))
        fwd = ForwardModel.for_grid(grid, 2)
        assert np.array_equal(fwd(unit_circle.coeffs), grid.values.ravel())

    def test_coarse_resolution_differs(self, unit_circle, plane_l2):
        grid = sample_shape(unit_circle, plane_l2, BSplineKernel(2))
        fwd = ForwardModel.for_grid(grid, 2)
        coarse = fwd(unit_circle.coeffs, coarse=True)
        assert coarse.shape == grid.values.ravel().shape
        assert not np.array_equal(coarse, grid.values.ravel())


class TestConsistency:
    def test_true_coefficients_are_fixed_point(self, unit_circle, plane_l2):
        grid = sample_shape(unit_circle, plane_l2, BSplineKernel(2))
        fwd = ForwardModel.for_grid(grid, 2)
        out = refine_consistency(unit_circle.coeffs, grid, fwd, max_iter=3)
        assert np.array_equal(out.coeffs, unit_circle.coeffs)
        assert out.residual_history[0] == 0.0

    def test_perturbation_contracts(self, unit_circle, plane_l2):
        grid = sample_shape(unit_circle, plane_l2, BSplineKernel(2))
        fwd = ForwardModel.for_grid(grid, 2)
        rng = np.random.default_rng(1)
        a = unit_circle.coeffs * (1 + 1e-2 * rng.standard_normal(6))
        out = refine_consistency(a, grid, fwd, max_iter=5)
        assert out.residual_history[-1] <= out.residual_history[0] / 10

    def test_history_monotone(self, unit_circle, plane_l2):
        grid = sample_shape(unit_circle, plane_l2, BSplineKernel(2))
        noisy = add_noise(grid, 20.0, seed=0)
        fwd = ForwardModel.for_grid(grid, 2)
        out = refine_consistency(unit_circle.coeffs * 1.05, noisy, fwd, max_iter=4)
        hist = out.residual_history
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


class TestPipeline:
    @pytest.fixture(scope="class")
    @staticmethod
    def disk_grid():
        return sample_shape(circle_poly(1.5), ImagePlane(5.0, 1.0), BSplineKernel(6))

    def test_noiseless_stages(self, disk_grid):
        res = run_pipeline(disk_grid, 2, "conventional")
        assert res.a_qp is None
        assert np.array_equal(res.a_final, res.a_ls)
        assert set(res.diagnostics["sample_snr_db"]) == {"ls", "final"}
        plane = disk_grid.plane
        rec = res.polynomial("final")
        assert zero_set_distance(circle_poly(1.5), rec, plane) < 1e-2

    def test_orientation_inferred(self, disk_grid):
        # origin lies inside, so the recovered polynomial must be negative there
        res = run_pipeline(disk_grid, 2, "conventional")
        p = res.polynomial("final")
        assert evaluate(p, 0.0, 0.0) < 0
        assert evaluate(p, 4.0, 4.0) > 0
        assert res.diagnostics["ls"]["orientation"] == -1.0

    def test_noisy_runs_all_stages(self, disk_grid):
        noisy = add_noise(disk_grid, 20.0, seed=0)
        res = run_pipeline(noisy, 2, "conventional")
        assert res.a_qp is not None
        assert "consistency" in res.diagnostics
        snrs = res.diagnostics["sample_snr_db"]
        assert set(snrs) == {"ls", "qp", "final"}
        assert snrs["final"] >= snrs["qp"] - 1e-9

    def test_deterministic(self, disk_grid):
        noisy = add_noise(disk_grid, 20.0, seed=0)
        r1 = run_pipeline(noisy, 2, "conventional")
        r2 = run_pipeline(noisy, 2, "conventional")
        assert np.array_equal(r1.a_final, r2.a_final)
        assert np.array_equal(r1.a_ls, r2.a_ls)

    def test_sample_scaling_leaves_zero_set(self, disk_grid):
        # the annihilation matrix is row-normalized, so a global sample
        # rescaling leaves the LS stage unchanged
        from dataclasses import replace

        from algshape.bspline import classical_coefficients

        rep = classical_coefficients(
            BSplineKernel(6), 3,
            (int(disk_grid.k_values[0]), int(disk_grid.k_values[-1])),
        )
        s1 = build_system(disk_grid, 2, "conventional", rep)
        s2 = build_system(replace(disk_grid, values=2.0 * disk_grid.values),
                          2, "conventional", rep)
        assert np.allclose(s1.matrix, s2.matrix, atol=1e-12)

    def test_generalized_cascade_on_disk(self):
        shape = circle_poly(3.0, center=(1.0, 0.0))
        grid = sample_shape(shape, ImagePlane(11.0, 1.0), BSplineKernel(6))
        res = run_pipeline(
            grid, 2, "generalized", load_asset(6, 13),
            PipelineOptions(sign_qp="on", consistency="on"),
        )
        d = zero_set_distance(shape, res.polynomial("final"), grid.plane)
        assert d < 0.05

    def test_generalized_needs_coefficients(self, disk_grid):
        with pytest.raises(ValueError):
            run_pipeline(disk_grid, 2, "generalized")

    def test_wrong_coefficient_type(self, disk_grid):
        with pytest.raises(TypeError):
            build_system(disk_grid, 2, "conventional", load_asset(6, 13))

    def test_unknown_mode(self, disk_grid):
        with pytest.raises(ValueError):
            build_system(disk_grid, 2, "bogus", load_asset(6, 13))


class TestResultContainer:
    def test_stage_access(self):
        res = RecoveryResult(2, np.zeros(6), None, np.ones(6))
        assert res.polynomial("final").degree == 2
        with pytest.raises(ValueError):
            res.polynomial("qp")
        with pytest.raises(KeyError):
            res.polynomial("bogus")

    def test_json_save(self, tmp_path):
        res = RecoveryResult(
            2, np.zeros(6), None, np.ones(6),
            {"snr": float("inf"), "arr": np.arange(3)},
        )
        path = tmp_path / "r.json"
        res.save(path)
        data = json.loads(path.read_text())
        assert data["degree"] == 2
        assert data["a_qp"] is None
        assert data["diagnostics"]["snr"] == "inf"
        assert data["diagnostics"]["arr"] == [0, 1, 2]
