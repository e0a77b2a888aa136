import math

import numpy as np
import pytest

from followbot.geometry import Pose2D
from followbot.tracking import (
    CvState,
    Measurement,
    MmEstimate,
    TrackerConfig,
    UniState,
    check_fault,
    cv_matrices,
    cv_predict,
    cv_update,
    gpb1_step,
    initial_estimate,
    local_to_world,
    uni_jacobian,
    uni_predict,
    uni_transition,
    uni_update,
)

CFG = TrackerConfig()
R = np.diag([0.05 ** 2, 0.05 ** 2])


def meas(x, y, t=0.0):
    return Measurement(np.array([x, y], dtype=float), R, t)


class TestLocalToWorld:
    def test_identity_pose(self):
        assert local_to_world((1.5, -0.5), Pose2D(0, 0, 0)) == (1.5, -0.5)

    def test_translation(self):
        assert local_to_world((2.0, 0.0), Pose2D(1.0, 1.0, 0.0)) == (3.0, 1.0)

    def test_rotation(self):
        out = local_to_world((1.0, 0.0), Pose2D(0.0, 0.0, math.pi / 2.0))
        assert out == pytest.approx((0.0, 1.0), abs=1e-12)


class TestCvFilter:
    def test_stationary_prediction_grows_by_process_noise(self):
        s = CvState(np.zeros(4), np.diag([0.1, 0.1, 0.2, 0.2]))
        dt = 0.05
        out = cv_predict(s, dt, CFG.q_cov)
        assert np.allclose(out.mean, 0.0)
        _, B = cv_matrices(dt)
        expected = np.diag([0.1, 0.1, 0.2, 0.2]).astype(float)
        A, _ = cv_matrices(dt)
        expected = A @ expected @ A.T + B @ CFG.q_cov @ B.T
        assert np.allclose(out.cov, expected, atol=1e-15)

    def test_zero_innovation_keeps_mean_and_contracts(self):
        s = CvState(np.array([1.0, 2.0, 0.3, -0.1]), np.eye(4) * 0.5)
        out, like = cv_update(s, meas(1.0, 2.0))
        assert np.allclose(out.mean, s.mean)
        assert np.trace(out.cov) < np.trace(s.cov)
        assert like > 0.0

    def test_constant_velocity_estimation(self):
        # Leader at constant (1, 0.5) m/s; estimates should settle inside the
        # filter's own 3-sigma velocity bounds.
        rng = np.random.default_rng(42)
        dt = 0.05
        truth_v = np.array([1.0, 0.5])
        pos = np.zeros(2)
        state = CvState(
            np.array([0.0, 0.0, 0.0, 0.0]),
            np.diag([0.05 ** 2, 0.05 ** 2, 1.5 ** 2, 1.5 ** 2]),
        )
        for _ in range(200):
            pos = pos + truth_v * dt
            state = cv_predict(state, dt, CFG.q_cov)
            z = meas(*(pos + rng.normal(0.0, 0.05, 2)))
            state, _ = cv_update(state, z)
        err = state.mean[2:] - truth_v
        sig = np.sqrt(np.diag(state.cov)[2:])
        assert abs(err[0]) <= 3.0 * sig[0]
        assert abs(err[1]) <= 3.0 * sig[1]


class TestUniFilter:
    def test_rest_state_is_fixed_point(self):
        s = UniState(np.array([1.0, 2.0, 0.7, 0.0, 0.0]), np.eye(5) * 0.1)
        out = uni_predict(s, 0.05, CFG.e_cov)
        assert np.allclose(out.mean, s.mean)

    def test_forward_motion(self):
        s = UniState(np.array([0.0, 0.0, 0.0, 1.0, 0.0]), np.eye(5) * 0.1)
        out = uni_predict(s, 0.1, CFG.e_cov)
        assert out.mean[0] == pytest.approx(0.1)
        assert out.mean[1] == pytest.approx(0.0)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        dt = 0.05
        for _ in range(100):
            mean = np.array([
                rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3),
                rng.uniform(-2, 2), rng.uniform(-1.5, 1.5),
            ])
            jac = uni_jacobian(mean, dt)
            fd = np.zeros((5, 5))
            h = 1e-6
            for j in range(5):
                up = mean.copy()
                dn = mean.copy()
                up[j] += h
                dn[j] -= h
                fu = uni_transition(up, dt)
                fd_col = uni_transition(dn, dt)
                diff = fu - fd_col
                # Heading wraps; compare on the raw (unwrapped) transition.
                diff[2] = (up[2] + dt * up[4]) - (dn[2] + dt * dn[4])
                fd[:, j] = diff / (2.0 * h)
            assert np.max(np.abs(jac - fd)) <= 1e-6 * max(1.0, np.max(np.abs(jac)))

    def test_update_observes_position(self):
        s = UniState(np.array([0.0, 0.0, 0.5, 1.0, 0.1]), np.eye(5) * 0.2)
        out, like = uni_update(s, meas(0.1, -0.1))
        assert like > 0.0
        assert np.trace(out.cov) < np.trace(s.cov)


class TestGpb1:
    def rest_estimate(self, x=1.0, y=2.0):
        return initial_estimate(meas(x, y), CFG)

    def test_no_measurement_keeps_symmetric_probabilities(self):
        est = self.rest_estimate()
        out = gpb1_step(est, None, 0.05, CFG)
        assert np.allclose(out.mu, [0.5, 0.5], atol=1e-12)

    def test_equal_likelihoods_leave_mu_unchanged(self):
        # Mirrored moving states: the unicycle covariance is the exact image
        # of the CV covariance, so one-step predictions and likelihoods match
        # and the symmetric transition matrix keeps the probabilities at half.
        cfg = TrackerConfig(q_accel=0.0, e_accel=0.0, e_alpha=0.0)
        r2 = 0.05 ** 2
        svx2, svy2 = 0.3 ** 2, 0.2 ** 2
        cv = CvState(np.array([0.0, 0.0, 1.0, 0.0]), np.diag([r2, r2, svx2, svy2]))
        uni = UniState(
            np.array([0.0, 0.0, 0.0, 1.0, 0.0]),
            np.diag([r2, r2, svy2, svx2, 0.0]),
        )
        est = MmEstimate(cv, uni, np.array([0.5, 0.5]), np.zeros(2), np.eye(2) * r2)
        dt = 0.05
        out = gpb1_step(est, meas(dt, 0.0), dt, cfg)
        assert out.mu[0] == pytest.approx(0.5, abs=1e-12)

    def test_cv_truth_data_favours_cv_model(self):
        # Monte Carlo over seeded runs of data generated by the linear
        # constant-velocity model itself; the averaged late-window model
        # probability must side with that model.
        dt = 0.05
        A, B = cv_matrices(dt)
        late_means = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            h = np.zeros(4)
            est = None
            mus = []
            for k in range(100):
                h = A @ h + B @ rng.normal(0.0, 0.8, 2)
                z = meas(*(h[:2] + rng.normal(0.0, 0.05, 2)), t=k * dt)
                est = gpb1_step(est, z, dt, CFG) if est is not None else initial_estimate(z, CFG)
                mus.append(est.mu[0])
            late_means.append(float(np.mean(mus[50:])))
        assert float(np.mean(late_means)) > 0.5

    def test_smooth_arc_data_favours_unicycle_model(self):
        dt = 0.05
        rng = np.random.default_rng(2)
        pos = np.zeros(2)
        heading = 0.0
        est = initial_estimate(meas(0.0, 0.0), CFG)
        mus = []
        for k in range(300):
            heading += 0.5 * dt
            pos = pos + 0.9 * dt * np.array([math.cos(heading), math.sin(heading)])
            z = meas(*(pos + rng.normal(0.0, 0.05, 2)), t=k * dt)
            est = gpb1_step(est, z, dt, CFG)
            mus.append(est.mu[0])
        assert float(np.mean(mus[150:])) < 0.5

    def test_predict_only_grows_fused_covariance(self):
        est = self.rest_estimate()
        est = gpb1_step(est, meas(1.0, 2.0), 0.05, CFG)
        trace = np.trace(est.fused_cov_pos)
        out = gpb1_step(est, None, 0.05, CFG)
        assert np.trace(out.fused_cov_pos) > trace

    def test_mu_normalized_every_step(self):
        rng = np.random.default_rng(11)
        est = self.rest_estimate()
        for k in range(300):
            z = None
            if rng.random() < 0.8:
                z = meas(rng.uniform(-5, 5), rng.uniform(-5, 5), t=k * 0.05)
            est = gpb1_step(est, z, 0.05, CFG)
            assert abs(float(est.mu.sum()) - 1.0) <= 1e-12

    def test_zero_likelihood_falls_back_to_transition_prior(self):
        est = self.rest_estimate(0.0, 0.0)
        # A measurement absurdly far away underflows both Gaussians.
        out = gpb1_step(est, meas(1e9, 1e9), 0.05, CFG)
        expected = CFG.transition_matrix.T @ np.array([0.5, 0.5])
        assert np.allclose(out.mu, expected / expected.sum(), atol=1e-12)

    def test_pinned_cv_equals_standalone_filter(self):
        cfg = TrackerConfig(transition=((1.0, 0.0), (0.0, 1.0)))
        est = initial_estimate(meas(0.0, 0.0), cfg)
        est.mu = np.array([1.0, 0.0])
        standalone = CvState(est.cv.mean.copy(), est.cv.cov.copy())
        rng = np.random.default_rng(5)
        pos = np.zeros(2)
        for k in range(50):
            pos = pos + np.array([0.04, 0.02])
            z = meas(*(pos + rng.normal(0, 0.05, 2)), t=k * 0.05)
            est = gpb1_step(est, z, 0.05, cfg)
            standalone = cv_predict(standalone, 0.05, cfg.q_cov)
            standalone, _ = cv_update(standalone, z)
            assert np.allclose(est.cv.mean, standalone.mean, atol=1e-12)
            assert np.allclose(est.cv.cov, standalone.cov, atol=1e-12)
            assert np.allclose(est.fused_position, standalone.mean[:2], atol=1e-12)
            assert est.mu[0] == pytest.approx(1.0, abs=1e-15)

    def test_covariances_stay_psd_over_long_random_run(self):
        rng = np.random.default_rng(19)
        est = self.rest_estimate(0.0, 0.0)
        pos = np.zeros(2)
        vel = np.zeros(2)
        for k in range(10_000):
            vel = vel + rng.normal(0.0, 0.8, 2) * 0.05
            vel = np.clip(vel, -2.0, 2.0)
            pos = pos + vel * 0.05
            z = None
            if rng.random() < 0.85:
                z = meas(*(pos + rng.normal(0.0, 0.05, 2)), t=k * 0.05)
            est = gpb1_step(est, z, 0.05, CFG)
            if k % 20 == 0:
                for cov in (est.cv.cov, est.uni.cov, est.fused_cov_pos):
                    assert float(np.min(np.linalg.eigvalsh(cov))) >= -1e-9


class TestFault:
    def test_tight_covariance_ok(self):
        est = initial_estimate(meas(0.0, 0.0), CFG)
        est.fused_cov_pos = np.eye(2) * 0.01
        assert not check_fault(est, 1.0)

    def test_growth_eventually_faults(self):
        est = initial_estimate(meas(0.0, 0.0), CFG)
        est = gpb1_step(est, meas(0.0, 0.0), 0.05, CFG)
        steps = 0
        while not check_fault(est, 1.0):
            est = gpb1_step(est, None, 0.05, CFG)
            steps += 1
            assert steps < 2000
        assert math.sqrt(np.max(np.linalg.eigvalsh(est.fused_cov_pos))) > 1.0

    def test_infinite_limit_never_faults(self):
        est = initial_estimate(meas(0.0, 0.0), CFG)
        est.fused_cov_pos = np.eye(2) * 1e9
        assert not check_fault(est, math.inf)

    def test_rejects_nonpositive_limit(self):
        est = initial_estimate(meas(0.0, 0.0), CFG)
        with pytest.raises(ValueError):
            check_fault(est, 0.0)
