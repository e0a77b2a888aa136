"""Path following and the safety policy.

The steering law works in the curvature domain: the command is
``chi = kappa - k_head * heading_error - k_lat * lateral_error`` and the
angular velocity is ``omega = v * chi``, so commands vanish with velocity and
nothing divides by it.  Velocity tracks a curvilinear gap to the leader,
slows on curvature, and is rate-limited; a separate policy scales it down to
a stop around on-path obstacles and sounds an alert when the leader walks
away during a stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clothoid import ClothoidSpline
from .geometry import Pose2D, normalize_angle
from .world import ControlInput

__all__ = [
    "ControllerConfig",
    "SafetyEvent",
    "project_to_path",
    "steer",
    "velocity_target",
    "velocity_policy",
    "safety_scale",
    "SafetyPolicy",
    "PathFollower",
]


@dataclass(frozen=True)
class ControllerConfig:
    k_lat: float = 1.5              # 1/m^2, lateral gain
    k_head: float = 2.5             # 1/m, heading gain
    v_nominal: float = 0.8          # m/s
    a_max: float = 0.5              # m/s^2
    follow_distance: float = 1.5    # m, target curvilinear gap to the leader
    v_curv_coeff: float = 1.2       # curvature slowdown numerator, m/s
    curvature_scale: float = 1.0    # m, weight of |kappa| in the slowdown
    d_slow: float = 1.5             # m, obstacle distance where slowing starts
    d_stop: float = 0.6             # m, obstacle distance where motion stops
    t_alert: float = 3.0            # s of stopped + distant leader before alert
    corridor_halfwidth: float = 0.4  # m, half-width of the on-path corridor

    def __post_init__(self):
        for name in (
            "k_lat", "k_head", "v_nominal", "a_max", "follow_distance",
            "v_curv_coeff", "curvature_scale", "d_slow", "d_stop", "t_alert",
            "corridor_halfwidth",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.d_stop >= self.d_slow:
            raise ValueError("d_stop must be smaller than d_slow")


@dataclass(frozen=True)
class SafetyEvent:
    kind: str  # "slow_down" | "stop" | "sound_alert"
    timestamp: float


def project_to_path(
    robot_pose: Pose2D,
    spline: ClothoidSpline,
    coarse_step: float = 0.05,
    samples: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[float, float, float]:
    """Closest point on the spline: arc length, signed lateral and heading error.

    Coarse grid argmin at ``coarse_step`` resolution plus golden-section
    refinement.  Lateral error is positive when the robot sits left of the
    path; heading error is robot heading minus path tangent, normalized.
    """
    s_grid, pts = samples if samples is not None else spline.sample(coarse_step)
    d2 = (pts[:, 0] - robot_pose.x) ** 2 + (pts[:, 1] - robot_pose.y) ** 2
    i = int(np.argmin(d2))
    lo = float(s_grid[max(i - 1, 0)])
    hi = float(s_grid[min(i + 1, len(s_grid) - 1)])

    def dist2(s: float) -> float:
        pose, _, _ = spline.eval(s)
        return (pose.x - robot_pose.x) ** 2 + (pose.y - robot_pose.y) ** 2

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = dist2(c), dist2(d)
    for _ in range(40):
        if b - a < 1e-9:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = dist2(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = dist2(d)
    s_star = 0.5 * (a + b)
    pose_t, _, _ = spline.eval(s_star)
    nx = -math.sin(pose_t.theta)
    ny = math.cos(pose_t.theta)
    lateral = (robot_pose.x - pose_t.x) * nx + (robot_pose.y - pose_t.y) * ny
    heading_error = normalize_angle(robot_pose.theta - pose_t.theta)
    return s_star, lateral, heading_error


def steer(lateral_error: float, heading_error: float, kappa: float,
          config: ControllerConfig) -> float:
    """Curvature-domain steering command (angular velocity per unit speed)."""
    return kappa - config.k_head * heading_error - config.k_lat * lateral_error


def velocity_target(gap_to_leader: float, kappa: float, config: ControllerConfig) -> float:
    """Unclamped velocity setpoint from leader gap and path curvature."""
    frac = min(max((gap_to_leader - config.follow_distance) / config.follow_distance, 0.0), 1.0)
    v_gap = config.v_nominal * frac
    v_curv = config.v_curv_coeff / (1.0 + abs(kappa) * config.curvature_scale)
    return min(v_gap, v_curv)


def velocity_policy(gap_to_leader: float, kappa: float, v_prev: float, dt: float,
                    config: ControllerConfig) -> float:
    """Velocity from leader gap and path curvature, acceleration-limited.

    The gap term holds the configured curvilinear follow distance; the
    curvature term slows the platform on sharp curves; the result never
    changes faster than ``a_max`` per second and never goes negative.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    v_target = velocity_target(gap_to_leader, kappa, config)
    v = min(max(v_target, v_prev - config.a_max * dt), v_prev + config.a_max * dt)
    return max(v, 0.0)


def safety_scale(obstacle_distance: float | None, config: ControllerConfig) -> float:
    """Velocity scale from the nearest on-path obstacle: 1 free, 0 stopped."""
    if obstacle_distance is None or obstacle_distance >= config.d_slow:
        return 1.0
    if obstacle_distance <= config.d_stop:
        return 0.0
    return (obstacle_distance - config.d_stop) / (config.d_slow - config.d_stop)


class SafetyPolicy:
    """Slow / stop / alert episodes around on-path obstacles.

    An episode starts when the velocity scale first drops below one and ends
    when the path is free again.  Per episode: one slow-down event, one stop
    event when the scale reaches zero, and at most one sound alert once the
    robot has been stopped while the leader gap stayed beyond twice the follow
    distance for ``t_alert`` seconds.

    Creeping down the ramp approaches the stop distance only asymptotically,
    so scales below ``stop_latch`` snap to a full stop; a stop only releases
    once the scale recovers past ``stop_release`` (hysteresis against sensor
    noise at the boundary).
    """

    def __init__(self, config: ControllerConfig, stop_latch: float = 0.05,
                 stop_release: float = 0.2):
        self.config = config
        self.stop_latch = stop_latch
        self.stop_release = stop_release
        self._episode = False
        self._stopped = False
        self._alert_sent = False
        self._alert_timer = 0.0

    def step(
        self,
        obstacle_distance: float | None,
        leader_gap: float | None,
        dt: float,
        now: float,
    ) -> tuple[float, list[SafetyEvent]]:
        cfg = self.config
        scale = safety_scale(obstacle_distance, cfg)
        if scale <= self.stop_latch or (self._stopped and scale < self.stop_release):
            scale = 0.0
        events: list[SafetyEvent] = []
        if scale >= 1.0:
            self._episode = False
            self._stopped = False
            self._alert_sent = False
            self._alert_timer = 0.0
            return scale, events
        if not self._episode:
            self._episode = True
            events.append(SafetyEvent("slow_down", now))
        if scale == 0.0:
            if not self._stopped:
                self._stopped = True
                events.append(SafetyEvent("stop", now))
            if leader_gap is not None and leader_gap > 2.0 * cfg.follow_distance:
                self._alert_timer += dt
            else:
                self._alert_timer = 0.0
            if self._alert_timer >= cfg.t_alert and not self._alert_sent:
                self._alert_sent = True
                events.append(SafetyEvent("sound_alert", now))
        else:
            self._stopped = False
            self._alert_timer = 0.0
        return scale, events


class PathFollower:
    """Loop-side wrapper: spline snapshot, velocity memory, safety state."""

    def __init__(self, config: ControllerConfig, v_max: float = math.inf,
                 omega_max: float = math.inf, chi_max: float = 3.0):
        self.config = config
        self.v_max = v_max
        self.omega_max = omega_max
        self.chi_max = chi_max
        self.safety = SafetyPolicy(config)
        self.v_prev = 0.0
        self._spline: ClothoidSpline | None = None
        self._version = -1
        self._samples: tuple[np.ndarray, np.ndarray] | None = None

    def set_spline(self, spline: ClothoidSpline | None, version: int):
        if version == self._version:
            return
        self._spline = spline
        self._version = version
        self._samples = spline.sample(0.05) if spline is not None else None

    @property
    def spline(self) -> ClothoidSpline | None:
        return self._spline

    def obstacle_distance(self, robot_s: float, points_world: list[tuple[float, float]]) -> float | None:
        """Arc-length distance to the nearest point inside the path corridor."""
        if self._samples is None or not points_world:
            return None
        s_grid, pts = self._samples
        best = None
        for px, py in points_world:
            d2 = (pts[:, 0] - px) ** 2 + (pts[:, 1] - py) ** 2
            i = int(np.argmin(d2))
            if math.sqrt(float(d2[i])) > self.config.corridor_halfwidth:
                continue
            ds = float(s_grid[i]) - robot_s
            if ds <= 0.05:
                continue
            if best is None or ds < best:
                best = ds
        return best

    def step(
        self,
        robot_pose: Pose2D,
        leader_world: tuple[float, float] | None,
        obstacle_points_world: list[tuple[float, float]],
        dt: float,
        now: float,
    ) -> tuple[ControlInput, dict, list[SafetyEvent]]:
        if self._spline is None or self._spline.total_length < 1e-6:
            v = max(self.v_prev - self.config.a_max * dt, 0.0)
            self.v_prev = v
            return ControlInput(v, 0.0), {"s": 0.0, "lateral": 0.0,
                                          "heading_error": 0.0, "kappa": 0.0,
                                          "gap": 0.0, "scale": 1.0}, []
        s_star, lateral, heading_error = project_to_path(
            robot_pose, self._spline, samples=self._samples
        )
        _, kappa, _ = self._spline.eval(s_star)
        end_pose, _, _ = self._spline.eval(self._spline.total_length)
        gap = self._spline.total_length - s_star
        if leader_world is not None:
            gap += math.hypot(leader_world[0] - end_pose.x, leader_world[1] - end_pose.y)
        obstacle_d = self.obstacle_distance(s_star, obstacle_points_world)
        scale, events = self.safety.step(obstacle_d, gap, dt, now)
        # The scale applies to the unclamped target; the rate limit comes
        # last so the acceleration bound holds even when an obstacle pops up.
        v_target = velocity_target(gap, kappa, self.config) * scale
        v = min(max(v_target, self.v_prev - self.config.a_max * dt),
                self.v_prev + self.config.a_max * dt)
        v = min(max(v, 0.0), self.v_max)
        chi = steer(lateral, heading_error, kappa, self.config)
        chi = min(max(chi, -self.chi_max), self.chi_max)
        omega = v * chi
        omega = min(max(omega, -self.omega_max), self.omega_max)
        self.v_prev = v
        telemetry = {
            "s": s_star,
            "lateral": lateral,
            "heading_error": heading_error,
            "kappa": kappa,
            "gap": gap,
            "scale": scale,
            "obstacle_distance": obstacle_d,
        }
        return ControlInput(v, omega), telemetry, events
