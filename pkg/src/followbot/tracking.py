"""Global-frame leader tracking.

Two motion models run side by side: a linear constant-velocity Kalman filter
driven by acceleration noise, and an extended Kalman filter over unicycle
states (position, heading, speed, turn rate).  A first-order pseudo-Bayesian
mixer re-bases both filters on a single fused prior each step, weights them by
measurement likelihood, and publishes one fused position with covariance;
estimate uncertainty above a limit signals a tracking fault.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D, local_to_parent, normalize_angle

__all__ = [
    "CvState",
    "UniState",
    "Measurement",
    "MmEstimate",
    "TrackerConfig",
    "NumericalFault",
    "local_to_world",
    "cv_predict",
    "cv_update",
    "uni_predict",
    "uni_update",
    "uni_transition",
    "uni_jacobian",
    "gpb1_step",
    "initial_estimate",
    "check_fault",
]

_PSD_FLOOR = -1e-9

_H_CV = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
_H_UNI = np.array([[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0]])


class NumericalFault(Exception):
    """Covariance lost positive semi-definiteness."""


@dataclass
class CvState:
    mean: np.ndarray  # [x, y, vx, vy]
    cov: np.ndarray   # 4x4


@dataclass
class UniState:
    mean: np.ndarray  # [x, y, theta, v, omega]
    cov: np.ndarray   # 5x5


@dataclass(frozen=True)
class Measurement:
    z: np.ndarray          # (x, y) in W
    R: np.ndarray          # 2x2, symmetric positive definite
    timestamp: float = 0.0


@dataclass
class MmEstimate:
    cv: CvState
    uni: UniState
    mu: np.ndarray                 # model probabilities, sums to 1
    fused_position: np.ndarray     # (x, y) in W
    fused_cov_pos: np.ndarray      # 2x2


@dataclass(frozen=True)
class TrackerConfig:
    q_accel: float = 0.8            # CV acceleration noise, m/s^2
    e_accel: float = 0.8            # unicycle longitudinal accel noise, m/s^2
    e_alpha: float = 1.0            # unicycle angular accel noise, rad/s^2
    transition: tuple = ((0.95, 0.05), (0.05, 0.95))
    measurement_sigma: float = 0.05
    fault_limit: float = 1.0        # meters of fused position std
    init_speed_sigma: float = 1.5
    init_omega_sigma: float = 1.0

    @property
    def q_cov(self) -> np.ndarray:
        return np.diag([self.q_accel ** 2, self.q_accel ** 2])

    @property
    def e_cov(self) -> np.ndarray:
        return np.diag([self.e_accel ** 2, self.e_alpha ** 2])

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=float)


def local_to_world(local: tuple[float, float], robot_pose: Pose2D) -> tuple[float, float]:
    """Rigid transform of a robot-frame point into the world frame."""
    return local_to_parent(robot_pose, local)


def _check_psd(cov: np.ndarray):
    if float(np.min(np.linalg.eigvalsh(cov))) < _PSD_FLOOR:
        raise NumericalFault("covariance is not positive semi-definite")


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def _kf_update(mean, cov, z, R, H):
    innov = np.asarray(z, dtype=float) - H @ mean
    S = H @ cov @ H.T + R
    det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    if det <= 0.0:
        raise NumericalFault("singular innovation covariance")
    S_inv = np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]]) / det
    K = cov @ H.T @ S_inv
    mean_new = mean + K @ innov
    ikh = np.eye(len(mean)) - K @ H
    cov_new = _symmetrize(ikh @ cov @ ikh.T + K @ R @ K.T)
    _check_psd(cov_new)
    maha = float(innov @ S_inv @ innov)
    likelihood = math.exp(-0.5 * maha) / (2.0 * math.pi * math.sqrt(det))
    return mean_new, cov_new, likelihood


def cv_matrices(dt: float) -> tuple[np.ndarray, np.ndarray]:
    A = np.array(
        [[1.0, 0.0, dt, 0.0], [0.0, 1.0, 0.0, dt], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
    )
    B = np.array([[0.5 * dt * dt, 0.0], [0.0, 0.5 * dt * dt], [dt, 0.0], [0.0, dt]])
    return A, B


def cv_predict(s: CvState, dt: float, q_cov: np.ndarray) -> CvState:
    """Constant-velocity prediction with acceleration noise covariance Q."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    A, B = cv_matrices(dt)
    mean = A @ s.mean
    cov = _symmetrize(A @ s.cov @ A.T + B @ q_cov @ B.T)
    return CvState(mean, cov)


def cv_update(s: CvState, z: Measurement) -> tuple[CvState, float]:
    """Position update; returns the Gaussian measurement likelihood."""
    mean, cov, like = _kf_update(s.mean, s.cov, z.z, z.R, _H_CV)
    return CvState(mean, cov), like


def uni_transition(mean: np.ndarray, dt: float) -> np.ndarray:
    x, y, th, v, om = mean
    return np.array(
        [
            x + dt * v * math.cos(th),
            y + dt * v * math.sin(th),
            normalize_angle(th + dt * om),
            v,
            om,
        ]
    )


def uni_jacobian(mean: np.ndarray, dt: float) -> np.ndarray:
    """Analytic Jacobian of the unicycle transition wrt the state."""
    _, _, th, v, _ = mean
    return np.array(
        [
            [1.0, 0.0, -dt * v * math.sin(th), dt * math.cos(th), 0.0],
            [0.0, 1.0, dt * v * math.cos(th), dt * math.sin(th), 0.0],
            [0.0, 0.0, 1.0, 0.0, dt],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )


def uni_predict(s: UniState, dt: float, e_cov: np.ndarray) -> UniState:
    """EKF prediction: nonlinear transition, Jacobian-propagated covariance."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    F = uni_jacobian(s.mean, dt)
    B = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [dt, 0.0], [0.0, dt]])
    mean = uni_transition(s.mean, dt)
    cov = _symmetrize(F @ s.cov @ F.T + B @ e_cov @ B.T)
    return UniState(mean, cov)


def uni_update(s: UniState, z: Measurement) -> tuple[UniState, float]:
    mean, cov, like = _kf_update(s.mean, s.cov, z.z, z.R, _H_UNI)
    mean[2] = normalize_angle(mean[2])
    return UniState(mean, cov), like


def _psd_floor(cov: np.ndarray) -> np.ndarray:
    """Clip tiny negative eigenvalues introduced by block-wise mixing."""
    cov = _symmetrize(cov)
    w, v = np.linalg.eigh(cov)
    if w[0] >= 0.0:
        return cov
    w = np.clip(w, 1e-12, None)
    return _symmetrize((v * w) @ v.T)


def _uni_velocity(uni: UniState) -> np.ndarray:
    _, _, th, v, _ = uni.mean
    return np.array([v * math.cos(th), v * math.sin(th)])


def _rebase_cv(cv: CvState, pos: np.ndarray, pos_cov: np.ndarray) -> CvState:
    mean = np.array([pos[0], pos[1], cv.mean[2], cv.mean[3]])
    cov = cv.cov.copy()
    cov[:2, :2] = pos_cov
    return CvState(mean, _psd_floor(cov))


def _rebase_uni(uni: UniState, pos: np.ndarray, pos_cov: np.ndarray,
                fused_vel: np.ndarray) -> UniState:
    speed = math.hypot(fused_vel[0], fused_vel[1])
    theta = math.atan2(fused_vel[1], fused_vel[0]) if speed > 1e-6 else float(uni.mean[2])
    mean = np.array([pos[0], pos[1], theta, float(uni.mean[3]), float(uni.mean[4])])
    cov = uni.cov.copy()
    cov[:2, :2] = pos_cov
    return UniState(mean, _psd_floor(cov))


def gpb1_step(
    est: MmEstimate, z: Measurement | None, dt: float, config: TrackerConfig
) -> MmEstimate:
    """One mix / predict / update / re-weight cycle of the two-model tracker.

    Both filters restart from the previous fused estimate (single mixed
    prior over the shared state): the position block carries the fused mean
    and covariance, and the unicycle heading re-bases on the direction of the
    probability-weighted velocity.  Velocity magnitudes and the turn rate are
    model-private, so the two hypotheses keep their distinct predictions;
    that difference is what the likelihood weighting measures.  With a
    measurement, model probabilities become the transition prior times the
    per-model likelihood, renormalized; when both likelihoods underflow to
    zero the transition prior is kept.  Without a measurement the filters run
    predict-only and probabilities evolve by the transition matrix alone.
    """
    mu = np.asarray(est.mu, dtype=float)
    p_cv = est.cv.mean[:2]
    p_uni = est.uni.mean[:2]
    pos = mu[0] * p_cv + mu[1] * p_uni
    d0 = p_cv - pos
    d1 = p_uni - pos
    pos_cov = _symmetrize(
        mu[0] * (est.cv.cov[:2, :2] + np.outer(d0, d0))
        + mu[1] * (est.uni.cov[:2, :2] + np.outer(d1, d1))
    )
    fused_vel = mu[0] * est.cv.mean[2:] + mu[1] * _uni_velocity(est.uni)
    cv_prior = _rebase_cv(est.cv, pos, pos_cov)
    uni_prior = _rebase_uni(est.uni, pos, pos_cov, fused_vel)

    cv_pred = cv_predict(cv_prior, dt, config.q_cov)
    uni_pred = uni_predict(uni_prior, dt, config.e_cov)
    mu_prior = config.transition_matrix.T @ mu

    if z is None:
        cv_new, uni_new = cv_pred, uni_pred
        mu_new = mu_prior
    else:
        cv_new, like_cv = cv_update(cv_pred, z)
        uni_new, like_uni = uni_update(uni_pred, z)
        weighted = mu_prior * np.array([like_cv, like_uni])
        total = float(weighted.sum())
        mu_new = weighted / total if total > 0.0 else mu_prior
    mu_new = mu_new / float(mu_new.sum())

    pos_cv = cv_new.mean[:2]
    pos_uni = uni_new.mean[:2]
    fused = mu_new[0] * pos_cv + mu_new[1] * pos_uni
    e0 = pos_cv - fused
    e1 = pos_uni - fused
    cov_pos = _symmetrize(
        mu_new[0] * (cv_new.cov[:2, :2] + np.outer(e0, e0))
        + mu_new[1] * (uni_new.cov[:2, :2] + np.outer(e1, e1))
    )
    return MmEstimate(cv_new, uni_new, mu_new, fused, cov_pos)


def initial_estimate(z: Measurement, config: TrackerConfig) -> MmEstimate:
    """Seed both filters at the first fused measurement, at rest."""
    zx, zy = float(z.z[0]), float(z.z[1])
    r0 = float(z.R[0, 0])
    r1 = float(z.R[1, 1])
    sv = config.init_speed_sigma
    cv = CvState(
        np.array([zx, zy, 0.0, 0.0]),
        np.diag([r0, r1, sv ** 2, sv ** 2]).astype(float),
    )
    uni = UniState(
        np.array([zx, zy, 0.0, 0.0, 0.0]),
        np.diag([r0, r1, math.pi ** 2, sv ** 2, config.init_omega_sigma ** 2]).astype(float),
    )
    mu = np.array([0.5, 0.5])
    fused = np.array([zx, zy])
    cov_pos = np.diag([r0, r1]).astype(float)
    return MmEstimate(cv, uni, mu, fused, cov_pos)


def check_fault(est: MmEstimate, limit: float) -> bool:
    """Fault iff the largest fused-position std exceeds ``limit`` meters."""
    if limit <= 0.0:
        raise ValueError("limit must be positive")
    if math.isinf(limit):
        return False
    top = float(np.max(np.linalg.eigvalsh(est.fused_cov_pos)))
    return math.sqrt(max(top, 0.0)) > limit
