import math

import numpy as np
import pytest

from followbot.clothoid import ClothoidSegment, ClothoidSpline, build_g2_spline
from followbot.control import (
    ControllerConfig,
    PathFollower,
    SafetyPolicy,
    project_to_path,
    safety_scale,
    steer,
    velocity_policy,
    velocity_target,
)
from followbot.geometry import Pose2D
from followbot.world import ControlInput, step_unicycle

from oracles import dense_spline_argmin

CFG = ControllerConfig()


def straight_spline(length=10.0):
    return ClothoidSpline([ClothoidSegment(0.0, 0.0, 0.0, 0.0, 0.0, length)])


class TestProjection:
    def test_on_path_aligned(self):
        s, lat, herr = project_to_path(Pose2D(3.0, 0.0, 0.0), straight_spline())
        assert s == pytest.approx(3.0, abs=1e-6)
        assert lat == pytest.approx(0.0, abs=1e-9)
        assert herr == pytest.approx(0.0, abs=1e-12)

    def test_left_offset_is_positive(self):
        _, lat, _ = project_to_path(Pose2D(3.0, 0.1, 0.0), straight_spline())
        assert lat == pytest.approx(0.1, abs=1e-9)

    def test_matches_dense_argmin_oracle(self):
        spline = build_g2_spline(
            [(0.0, 0.0), (0.8, 0.3), (1.5, 0.9), (2.0, 1.7), (2.2, 2.6)]
        )
        rng = np.random.default_rng(3)
        for _ in range(25):
            pose = Pose2D(
                float(rng.uniform(-0.5, 3.0)),
                float(rng.uniform(-0.5, 3.0)),
                float(rng.uniform(-math.pi, math.pi)),
            )
            s, _, _ = project_to_path(pose, spline)
            s_ref = dense_spline_argmin(spline, (pose.x, pose.y))
            assert abs(s - s_ref) <= 0.05  # coarse grid resolution


class TestSteer:
    def test_equilibrium_on_straight(self):
        assert steer(0.0, 0.0, 0.0, CFG) == 0.0

    def test_curvature_feedforward(self):
        assert steer(0.0, 0.0, 0.5, CFG) == 0.5

    def test_zero_velocity_means_zero_omega(self):
        chi = steer(0.3, -0.4, 0.2, CFG)
        assert 0.0 * chi == 0.0  # omega = v * chi vanishes with v

    def test_pushes_back_toward_path(self):
        # Left of the path and pointing left: command must turn right.
        assert steer(0.2, 0.1, 0.0, CFG) < 0.0


class TestVelocityPolicy:
    def test_hold_at_follow_distance(self):
        assert velocity_target(CFG.follow_distance, 0.0, CFG) == 0.0

    def test_ramp_limited_from_rest(self):
        v_prev = 0.0
        dt = 0.05
        for _ in range(40):
            v = velocity_policy(10.0, 0.0, v_prev, dt, CFG)
            assert v - v_prev == pytest.approx(min(CFG.a_max * dt, CFG.v_nominal - v_prev))
            v_prev = v
        assert v_prev == pytest.approx(CFG.v_nominal)

    def test_sharp_curve_slower_than_straight(self):
        straight = velocity_target(10.0, 0.0, CFG)
        curved = velocity_target(10.0, 2.0, CFG)
        assert curved < straight

    def test_never_negative(self):
        assert velocity_policy(0.0, 0.0, 0.01, 0.05, CFG) >= 0.0

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            velocity_policy(1.0, 0.0, 0.0, 0.0, CFG)


class TestSafety:
    def test_free_path(self):
        policy = SafetyPolicy(CFG)
        scale, events = policy.step(None, 5.0, 0.05, 0.0)
        assert scale == 1.0 and events == []

    def test_ramp_midpoint(self):
        assert safety_scale((CFG.d_slow + CFG.d_stop) / 2.0, CFG) == pytest.approx(0.5)

    def test_stop_and_single_alert_sequence(self):
        policy = SafetyPolicy(CFG)
        now = 0.0
        dt = 0.05
        kinds = []
        # obstacle creeps in, then sits inside d_stop while the leader leaves
        for d in np.linspace(CFG.d_slow + 0.2, CFG.d_stop - 0.1, 12):
            _, events = policy.step(float(d), 1.0, dt, now)
            kinds += [e.kind for e in events]
            now += dt
        for _ in range(int(CFG.t_alert / dt) + 5):
            _, events = policy.step(CFG.d_stop - 0.1, 4.0 * CFG.follow_distance, dt, now)
            kinds += [e.kind for e in events]
            now += dt
        assert kinds == ["slow_down", "stop", "sound_alert"]

    def test_alert_requires_distant_leader(self):
        policy = SafetyPolicy(CFG)
        now = 0.0
        for _ in range(200):
            _, events = policy.step(0.0, CFG.follow_distance, 0.05, now)
            assert all(e.kind != "sound_alert" for e in events)
            now += 0.05

    def test_episode_reset_allows_new_alert(self):
        policy = SafetyPolicy(CFG)
        now = 0.0

        def run_episode():
            nonlocal now
            kinds = []
            for _ in range(100):
                _, events = policy.step(0.0, 10.0, 0.05, now)
                kinds += [e.kind for e in events]
                now += 0.05
            _, events = policy.step(None, 10.0, 0.05, now)
            kinds += [e.kind for e in events]
            return kinds

        first = run_episode()
        second = run_episode()
        assert first.count("sound_alert") == 1
        assert second.count("sound_alert") == 1


class TestClosedLoop:
    def test_offset_converges_on_straight_path(self):
        # Start 0.3 m left of a straight path at fixed speed; the lateral
        # error must decay monotonically after the initial transient and
        # settle below 2 cm.
        spline = straight_spline(length=15.0)
        pose = Pose2D(0.0, 0.3, 0.0)
        dt = 0.05
        v = 0.8
        laterals = []
        for _ in range(200):
            _, lat, herr = project_to_path(pose, spline)
            chi = steer(lat, herr, 0.0, CFG)
            pose = step_unicycle(pose, ControlInput(v, v * chi), dt)
            laterals.append(abs(lat))
        after_first_second = laterals[20:]
        assert all(
            b <= a + 1e-9 for a, b in zip(after_first_second, after_first_second[1:])
        )
        assert laterals[-1] < 0.02

    def test_follower_acceleration_bound(self):
        follower = PathFollower(CFG)
        follower.set_spline(straight_spline(), version=1)
        pose = Pose2D(0.0, 0.05, 0.0)
        prev_v = 0.0
        for k in range(150):
            cmd, _, _ = follower.step(pose, (12.0, 0.0), [], 0.05, k * 0.05)
            assert abs(cmd.v - prev_v) <= CFG.a_max * 0.05 + 1e-12
            prev_v = cmd.v
            pose = step_unicycle(pose, cmd, 0.05)

    def test_follower_without_spline_idles(self):
        follower = PathFollower(CFG)
        cmd, telemetry, events = follower.step(Pose2D(0, 0, 0), None, [], 0.05, 0.0)
        assert cmd.v == 0.0 and cmd.omega == 0.0
        assert events == []

    def test_obstacle_in_corridor_measured_along_path(self):
        follower = PathFollower(CFG)
        follower.set_spline(straight_spline(), version=1)
        d = follower.obstacle_distance(2.0, [(5.0, 0.1)])
        assert d == pytest.approx(3.0, abs=0.06)
        assert follower.obstacle_distance(2.0, [(5.0, 1.0)]) is None
        assert follower.obstacle_distance(6.0, [(5.0, 0.0)]) is None


class TestConfigValidation:
    def test_rejects_nonpositive_gains(self):
        with pytest.raises(ValueError):
            ControllerConfig(k_lat=0.0)

    def test_rejects_inverted_thresholds(self):
        with pytest.raises(ValueError):
            ControllerConfig(d_slow=0.5, d_stop=0.6)
