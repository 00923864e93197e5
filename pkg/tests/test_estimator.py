"""Tests for the loss, the two block updates, and the outer fit loop."""

import numpy as np
import pytest

from geogress import (
    Dataset,
    DimensionMismatch,
    EndpointsInit,
    EstimatorConfig,
    GeodesicModel,
    InitFailure,
    NonpositiveTime,
    ProvidedInit,
    RandomInit,
    angle_constants,
    angle_gradient,
    angle_loss_terms,
    angle_mm_step,
    basis_update,
    curvature_weight,
    fit,
    init_endpoints,
    loss,
    planted_instance,
    random_geodesic,
    reconstruct,
    subspace_error,
)
from geogress.geodesic import orthonormal_complement


def lstsq_loss(dataset, model):
    """Independent oracle: per-sample least-squares fit of the loadings."""
    total = 0.0
    for t, x in zip(dataset.times, dataset.matrices):
        u = model.evaluate(t)
        g, *_ = np.linalg.lstsq(u, x, rcond=None)
        total += float(np.sum((x - u @ g) ** 2))
    return total


class TestLoss:
    def test_noiseless_planted_data_has_zero_loss(self):
        inst = planted_instance(8, 2, 3, 5, 0.0, 1.2, seed=1)
        scale = sum(np.sum(x * x) for x in inst.dataset.matrices)
        assert loss(inst.dataset, inst.truth) <= 1e-18 * scale

    def test_orthogonal_data_loses_everything(self):
        m = GeodesicModel(np.eye(8)[:, :2], np.eye(8)[:, 2:4], np.array([0.4, -0.2]))
        # columns only in coordinates 4..7, orthogonal to span([H Y]) at all t
        x = np.zeros((8, 3))
        x[5:, :] = np.random.default_rng(2).standard_normal((3, 3))
        ds = Dataset(np.array([0.0, 0.7]), (x, 2 * x))
        assert loss(ds, m) == pytest.approx(np.sum(x * x) + np.sum(4 * x * x), rel=1e-14)

    def test_matches_least_squares_oracle(self):
        for trial in range(10):
            inst = planted_instance(8, 2, 3, 5, 0.5, 1.3, seed=100 + trial)
            m = random_geodesic(8, 2, 1.0, seed=200 + trial)
            ours = loss(inst.dataset, m)
            assert ours == pytest.approx(lstsq_loss(inst.dataset, m), rel=1e-10)

    def test_trace_identity(self):
        inst = planted_instance(10, 3, 2, 7, 0.8, 1.4, seed=3)
        m = random_geodesic(10, 3, 1.2, seed=4)
        direct = loss(inst.dataset, m)
        total = sum(np.sum(x * x) for x in inst.dataset.matrices)
        proj = sum(
            np.sum((x.T @ m.evaluate(t)) ** 2) for t, x in zip(inst.dataset.times, inst.dataset.matrices)
        )
        assert direct == pytest.approx(total - proj, rel=1e-10)

    def test_dimension_mismatch(self):
        inst = planted_instance(8, 2, 1, 3, 0.1, 1.0, seed=5)
        with pytest.raises(DimensionMismatch):
            loss(inst.dataset, random_geodesic(10, 2, 1.0, seed=6))


class TestBasisUpdate:
    def test_noiseless_truth_is_fixed_point(self):
        inst = planted_instance(10, 2, 2, 6, 0.0, 1.3, seed=7)
        before = loss(inst.dataset, inst.truth)
        H, Y = basis_update(inst.dataset, inst.truth)
        after = loss(inst.dataset, GeodesicModel(H, Y, inst.truth.theta))
        scale = sum(np.sum(x * x) for x in inst.dataset.matrices)
        assert abs(after - before) <= 1e-12 * scale

    def test_output_is_orthonormal_pair(self):
        inst = planted_instance(12, 3, 1, 8, 0.6, 1.2, seed=8)
        m = random_geodesic(12, 3, 1.4, seed=9)
        H, Y = basis_update(inst.dataset, m)
        q = np.concatenate([H, Y], axis=1)
        assert np.max(np.abs(q.T @ q - np.eye(6))) <= 1e-10

    def test_rank_collapse_is_signaled_but_usable(self):
        # a single one-column sample cannot pin down 2k = 4 directions
        inst = planted_instance(10, 2, 1, 1, 0.1, 1.0, seed=50)
        m = random_geodesic(10, 2, 1.0, seed=51)
        with pytest.warns(Warning, match="rank deficient"):
            H, Y = basis_update(inst.dataset, m)
        q = np.concatenate([H, Y], axis=1)
        assert np.max(np.abs(q.T @ q - np.eye(4))) <= 1e-10

    def test_monte_carlo_monotonicity(self):
        # 200 random (dataset, model) pairs: the update never increases the loss.
        for trial in range(200):
            inst = planted_instance(12, 2, 1, 6, 0.4, 1.4, seed=1000 + trial)
            m = random_geodesic(12, 2, 1.5, seed=2000 + trial)
            before = loss(inst.dataset, m)
            H, Y = basis_update(inst.dataset, m)
            after = loss(inst.dataset, GeodesicModel(H, Y, m.theta))
            assert after <= before * (1 + 1e-10)


class TestAngleConstants:
    def test_base_columns_as_data(self):
        m = random_geodesic(10, 3, 0.0, seed=10)
        ds = Dataset(np.array([0.0]), (m.H,))
        c = angle_constants(ds, m.H, m.Y)
        np.testing.assert_allclose(c.alpha[0], np.ones(3), atol=1e-12)
        np.testing.assert_allclose(c.beta[0], np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(c.gamma[0], np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(c.r[0], 0.5 * np.ones(3), atol=1e-12)
        np.testing.assert_allclose(c.phi[0], np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(c.b[0], 0.5 * np.ones(3), atol=1e-12)

    def test_zero_data_gives_zero_constants(self):
        m = random_geodesic(8, 2, 1.0, seed=11)
        ds = Dataset(np.array([0.5]), (np.zeros((8, 3)),))
        c = angle_constants(ds, m.H, m.Y)
        for field in (c.alpha, c.beta, c.gamma, c.r, c.b):
            assert np.all(field == 0.0)

    def test_matches_dense_quadratic_forms(self):
        inst = planted_instance(9, 2, 4, 5, 0.7, 1.3, seed=12)
        m = random_geodesic(9, 2, 1.1, seed=13)
        c = angle_constants(inst.dataset, m.H, m.Y)
        for i, x in enumerate(inst.dataset.matrices):
            outer = x @ x.T
            np.testing.assert_allclose(c.alpha[i], np.diag(m.H.T @ outer @ m.H), rtol=1e-12)
            np.testing.assert_allclose(c.beta[i], np.diag(m.Y.T @ outer @ m.H), rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(c.gamma[i], np.diag(m.Y.T @ outer @ m.Y), rtol=1e-12)

    def test_amplitude_phase_identities(self):
        inst = planted_instance(9, 2, 4, 5, 0.7, 1.3, seed=14)
        m = random_geodesic(9, 2, 1.1, seed=15)
        c = angle_constants(inst.dataset, m.H, m.Y)
        np.testing.assert_allclose(c.r**2, (0.5 * (c.alpha - c.gamma)) ** 2 + c.beta**2, rtol=1e-12)
        np.testing.assert_allclose(c.b, 0.5 * (c.alpha + c.gamma), rtol=1e-12)
        assert np.all(c.r >= 0)


class TestCurvatureWeight:
    def test_limit_value_at_axis(self):
        assert curvature_weight(0.0, 1.0, 1.0, 0.0) == pytest.approx(4.0)
        assert curvature_weight(0.35 / (2 * 0.7), 0.7, 2.5, 0.35) == pytest.approx(4 * 0.7**2 * 2.5)

    def test_zero_amplitude_gives_zero(self):
        for theta in (-1.0, 0.0, 0.3, 2.0):
            assert curvature_weight(theta, 0.8, 0.0, 0.4) == 0.0

    def test_nonpositive_time_rejected(self):
        with pytest.raises(NonpositiveTime):
            curvature_weight(0.1, 0.0, 1.0, 0.0)
        with pytest.raises(NonpositiveTime):
            curvature_weight(0.1, -0.5, 1.0, 0.0)

    def test_nonnegative_and_finite(self):
        rng = np.random.default_rng(16)
        for _ in range(500):
            theta = rng.uniform(-10, 10)
            t = rng.uniform(0.01, 3.0)
            r = rng.uniform(0, 5.0)
            phi = rng.uniform(-np.pi, np.pi)
            w = curvature_weight(theta, t, r, phi)
            assert np.isfinite(w) and w >= -1e-12

    def test_majorizer_dominates_on_grid(self):
        # quadratic built from the weight stays above the cosine term and
        # touches it at the expansion point
        rng = np.random.default_rng(17)
        for _ in range(50):
            r = rng.uniform(0.1, 3.0)
            phi = rng.uniform(-np.pi, np.pi)
            t = rng.choice([0.3, 1.0, 2.0])
            ref = rng.uniform((phi - np.pi) / (2 * t), (phi + np.pi) / (2 * t))
            grid = np.linspace((phi - np.pi) / (2 * t), (phi + np.pi) / (2 * t), 2000)

            def f(x):
                return -r * np.cos(2 * x * t - phi)

            fp = 2 * r * t * np.sin(2 * ref * t - phi)
            w = curvature_weight(ref, t, r, phi)
            quad = f(ref) + fp * (grid - ref) + 0.5 * w * (grid - ref) ** 2
            assert np.all(quad >= f(grid) - 1e-9)
            assert abs(f(ref) - (f(ref) + 0.0)) <= 1e-12


class TestAngleStep:
    def make_constants(self, seed, d=10, k=2, ell=4, T=1):
        inst = planted_instance(d, k, ell, T, 0.2, 1.0, seed=seed)
        m = random_geodesic(d, k, 1.0, seed=seed + 1)
        return inst, m, angle_constants(inst.dataset, m.H, m.Y)

    def test_single_sample_jumps_to_cosine_axis(self):
        inst, m, _ = self.make_constants(18)
        t1 = 0.62
        ds = Dataset(np.array([t1]), (inst.dataset.matrices[0],))
        c = angle_constants(ds, m.H, m.Y)
        theta0 = np.array([0.2, -0.4])
        # both starting points lie inside the base interval around phi/(2 t1)
        stepped = angle_mm_step(c, theta0, ds.times)
        np.testing.assert_allclose(stepped, c.phi[0] / (2 * t1), rtol=1e-12)

    def test_zero_amplitude_leaves_theta_unchanged(self):
        m = random_geodesic(8, 2, 1.0, seed=19)
        ds = Dataset(np.array([0.5]), (np.zeros((8, 3)),))
        c = angle_constants(ds, m.H, m.Y)
        theta = np.array([0.3, -1.2])
        assert np.array_equal(angle_mm_step(c, theta, ds.times), theta)

    def test_time_zero_samples_are_inert(self):
        inst, m, _ = self.make_constants(20)
        x = inst.dataset.matrices[0]
        ds_zero = Dataset(np.array([0.0]), (x,))
        c = angle_constants(ds_zero, m.H, m.Y)
        theta = np.array([0.7, -0.1])
        assert np.array_equal(angle_mm_step(c, theta, ds_zero.times), theta)

    def test_negative_times_match_reflected_problem(self):
        # the cosine term is invariant under (t, phi) -> (-t, -phi), so a step
        # on negative times must match the explicitly reflected problem
        from dataclasses import replace

        inst = planted_instance(10, 2, 2, 6, 0.5, 1.2, seed=21)
        m = random_geodesic(10, 2, 1.0, seed=22)
        c = angle_constants(inst.dataset, m.H, m.Y)
        reflected = replace(c, phi=-c.phi)
        theta = np.array([0.4, -0.9])
        a = angle_mm_step(c, theta, -inst.dataset.times)
        b = angle_mm_step(reflected, theta, inst.dataset.times)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_gradient_correct_for_negative_times(self):
        inst = planted_instance(10, 2, 2, 6, 0.5, 1.2, seed=21)
        m = random_geodesic(10, 2, 1.0, seed=22)
        c = angle_constants(inst.dataset, m.H, m.Y)
        times = inst.dataset.times - 0.5
        theta = np.array([0.4, -0.9])
        grad = angle_gradient(c, theta, times)
        step = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = step
            fd = (
                angle_loss_terms(c, theta + e, times)[j]
                - angle_loss_terms(c, theta - e, times)[j]
            ) / (2 * step)
            assert grad[j] == pytest.approx(fd, rel=1e-5)

    def test_descends_separable_loss_per_angle(self):
        inst = planted_instance(12, 3, 2, 9, 0.4, 1.4, seed=23)
        m = random_geodesic(12, 3, 1.4, seed=24)
        c = angle_constants(inst.dataset, m.H, m.Y)
        theta = m.theta
        previous = angle_loss_terms(c, theta, inst.dataset.times)
        for _ in range(100):
            theta = angle_mm_step(c, theta, inst.dataset.times)
            current = angle_loss_terms(c, theta, inst.dataset.times)
            assert np.all(current <= previous + 1e-12)
            previous = current

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(25)
        step = 1e-6
        for trial in range(20):
            inst = planted_instance(10, 3, 2, 7, 0.6, 1.4, seed=3000 + trial)
            m = random_geodesic(10, 3, 1.3, seed=4000 + trial)
            c = angle_constants(inst.dataset, m.H, m.Y)
            theta = rng.uniform(-1.5, 1.5, 3)
            grad = angle_gradient(c, theta, inst.dataset.times)
            for j in range(3):
                e = np.zeros(3)
                e[j] = step
                hi = angle_loss_terms(c, theta + e, inst.dataset.times)[j]
                lo = angle_loss_terms(c, theta - e, inst.dataset.times)[j]
                fd = (hi - lo) / (2 * step)
                assert grad[j] == pytest.approx(fd, rel=1e-5, abs=1e-9)


class TestFit:
    def test_truth_init_converges_immediately_on_noiseless_data(self):
        inst = planted_instance(20, 3, 1, 30, 0.0, 1.3, seed=26)
        report = fit(inst.dataset, EstimatorConfig(init=ProvidedInit(inst.truth)))
        scale = sum(np.sum(x * x) for x in inst.dataset.matrices)
        assert report.converged
        assert report.outer_iters_run == 1
        assert np.all(report.loss_per_outer_iter <= 1e-18 * scale)

    def test_loss_trail_is_monotone(self):
        for trial in range(10):
            inst = planted_instance(20, 2, 1, 15, 10.0 ** -(trial % 3), 1.4, seed=5000 + trial)
            cfg = EstimatorConfig(init=RandomInit(2, seed=trial), outer_iters=60)
            report = fit(inst.dataset, cfg)
            trail = report.loss_per_outer_iter
            assert np.all(trail[1:] <= trail[:-1] * (1 + 1e-10))

    def test_ragged_and_packed_paths_agree(self):
        # same samples, one dataset ragged by construction
        inst = planted_instance(10, 2, 2, 6, 0.3, 1.2, seed=27)
        ragged = Dataset(
            np.concatenate([inst.dataset.times, [1.0]]),
            inst.dataset.matrices + (inst.dataset.matrices[-1][:, :1],),
        )
        packed_twin = Dataset(
            np.concatenate([inst.dataset.times, [1.0]]),
            inst.dataset.matrices + (inst.dataset.matrices[-1][:, :1],),
        )
        assert ragged.packed() is None
        cfg = EstimatorConfig(init=RandomInit(2, seed=1), outer_iters=10, rel_loss_tol=0.0)
        a = fit(ragged, cfg)
        b = fit(packed_twin, cfg)
        np.testing.assert_allclose(a.loss_per_outer_iter, b.loss_per_outer_iter, rtol=1e-9)

    def test_inner_basis_iters_still_monotone(self):
        inst = planted_instance(16, 2, 1, 12, 1e-2, 1.4, seed=28)
        cfg = EstimatorConfig(init=RandomInit(2, seed=2), outer_iters=40, inner_basis_iters=5)
        report = fit(inst.dataset, cfg)
        trail = report.loss_per_outer_iter
        assert np.all(trail[1:] <= trail[:-1] * (1 + 1e-10))

    def test_time_center_preserves_semantics(self):
        inst = planted_instance(14, 2, 1, 12, 1e-3, 1.3, seed=29)
        base = EstimatorConfig(init=RandomInit(2, seed=3), outer_iters=50)
        centered = EstimatorConfig(init=RandomInit(2, seed=3), outer_iters=50, time_center=0.5)
        rep = fit(inst.dataset, centered)
        # the returned model is expressed on the original axis: its loss on the
        # original dataset equals the last recorded (centered-axis) loss
        assert loss(inst.dataset, rep.model) == pytest.approx(rep.loss_per_outer_iter[-1], rel=1e-9)
        # and both runs are valid monotone descents
        rep_plain = fit(inst.dataset, base)
        for r in (rep, rep_plain):
            trail = r.loss_per_outer_iter
            assert np.all(trail[1:] <= trail[:-1] * (1 + 1e-10))

    def test_time_center_reexpression_preserves_projector_path(self):
        m = random_geodesic(12, 2, 1.2, seed=30)
        for t in np.linspace(0, 1, 9):
            u = m.shifted_origin(0.5).shifted_origin(-0.5).evaluate(t)
            v = m.evaluate(t)
            assert np.linalg.norm(u @ u.T - v @ v.T) <= 1e-10

    def test_callback_sees_every_recorded_iteration(self):
        inst = planted_instance(10, 2, 1, 8, 1e-2, 1.2, seed=31)
        seen = []
        cfg = EstimatorConfig(init=RandomInit(2, seed=4), outer_iters=25, rel_loss_tol=0.0)
        report = fit(inst.dataset, cfg, callback=lambda model, value: seen.append(value))
        np.testing.assert_array_equal(report.loss_per_outer_iter[1:], seen)

    def test_dimension_mismatch_between_init_and_data(self):
        inst = planted_instance(10, 2, 1, 8, 1e-2, 1.2, seed=32)
        wrong = random_geodesic(12, 2, 1.0, seed=5)
        with pytest.raises(DimensionMismatch):
            fit(inst.dataset, EstimatorConfig(init=ProvidedInit(wrong)))


class TestConfigValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            EstimatorConfig(init=RandomInit(2), outer_iters=0)
        with pytest.raises(ValueError):
            EstimatorConfig(init=RandomInit(2), inner_mm_iters=0)
        with pytest.raises(ValueError):
            EstimatorConfig(init=RandomInit(2), inner_basis_iters=0)
        with pytest.raises(ValueError):
            EstimatorConfig(init=RandomInit(2), rel_loss_tol=-1.0)
        with pytest.raises(ValueError):
            EstimatorConfig(init=EndpointsInit(2, pool_fraction=0.75))
        with pytest.raises(ValueError):
            EstimatorConfig(init=RandomInit(2), time_center=1.5)

    def test_pool_fraction_bound_on_init_endpoints(self):
        inst = planted_instance(10, 2, 1, 8, 0.1, 1.0, seed=52)
        with pytest.raises(ValueError):
            init_endpoints(inst.dataset, 2, 0.8)


class TestInitEndpoints:
    def test_static_data_yields_small_angles(self):
        inst = planted_instance(12, 3, 2, 16, 1e-5, 0.0, seed=33)
        init = init_endpoints(inst.dataset, 3, 0.25)
        assert np.max(np.abs(init.theta)) <= 0.1

    def test_two_exact_samples_recover_connecting_spans(self):
        truth = random_geodesic(10, 2, 1.2, seed=34)
        ds = Dataset(
            np.array([0.0, 1.0]),
            (truth.evaluate(0.0), truth.evaluate(1.0)),
        )
        init = init_endpoints(ds, 2, 0.25)
        assert subspace_error(init.evaluate(0.0), truth.evaluate(0.0)) <= 1e-10
        assert subspace_error(init.evaluate(1.0), truth.evaluate(1.0)) <= 1e-10

    def test_pool_too_small_raises(self):
        inst = planted_instance(12, 4, 1, 4, 1e-3, 1.0, seed=35)
        with pytest.raises(InitFailure):
            init_endpoints(inst.dataset, 4, 0.25)


class TestReconstruct:
    def test_in_span_data_is_unchanged(self):
        inst = planted_instance(10, 2, 3, 6, 0.0, 1.2, seed=36)
        for a, b in zip(reconstruct(inst.dataset, inst.truth), inst.dataset.matrices):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_orthogonal_data_reconstructs_to_zero(self):
        m = GeodesicModel(np.eye(8)[:, :2], np.eye(8)[:, 2:4], np.zeros(2))
        x = np.zeros((8, 2))
        x[6:, :] = 1.0
        ds = Dataset(np.array([0.3]), (x,))
        assert np.max(np.abs(reconstruct(ds, m)[0])) <= 1e-15

    def test_residual_matches_loss(self):
        inst = planted_instance(9, 2, 2, 7, 0.5, 1.3, seed=37)
        m = random_geodesic(9, 2, 1.0, seed=38)
        resid = sum(
            float(np.sum((x - xh) ** 2))
            for x, xh in zip(inst.dataset.matrices, reconstruct(inst.dataset, m))
        )
        assert resid == pytest.approx(loss(inst.dataset, m), rel=1e-12)
