import math

import numpy as np
import pytest

from followbot.geometry import Pose2D
from followbot.world import (
    Agent,
    CameraParams,
    ControlInput,
    ImageTrackerSim,
    LidarParams,
    WorldState,
    advance,
    simulate_camera,
    simulate_lidar,
    step_unicycle,
)

from oracles import ray_circle_range


def make_agent(agent_id, pts, radius=0.25, dim=8):
    rng = np.random.default_rng(sum(ord(c) for c in agent_id))
    return Agent(
        agent_id=agent_id,
        role="pedestrian",
        waypoints=pts,
        body_radius=radius,
        embedding_mean=rng.normal(size=dim),
    )


def quiet_world(agents=(), obstacles=(), **camera_kwargs):
    cam = CameraParams(sigma_px=0.0, sigma_z=0.0, sigma_e=0.0, p_miss=0.0, **camera_kwargs)
    return WorldState(
        agents=list(agents),
        obstacles=list(obstacles),
        lidar=LidarParams(sigma_r=0.0),
        camera=cam,
    )


class TestUnicycle:
    def test_straight_motion(self):
        out = step_unicycle(Pose2D(0, 0, 0), ControlInput(1.0, 0.0), 0.1)
        assert (out.x, out.y, out.theta) == pytest.approx((0.1, 0.0, 0.0))

    def test_pure_rotation(self):
        out = step_unicycle(Pose2D(0, 0, 0), ControlInput(0.0, math.pi), 0.5)
        assert (out.x, out.y) == (0.0, 0.0)
        assert out.theta == pytest.approx(math.pi / 2.0)

    def test_forward_euler_update(self):
        # cos(pi/2) = 0, sin(pi/2) = 1: only y and heading advance.
        out = step_unicycle(Pose2D(1.0, 2.0, math.pi / 2.0), ControlInput(2.0, 1.0), 0.5)
        assert out.x == pytest.approx(1.0, abs=1e-15)
        assert out.y == pytest.approx(3.0, abs=1e-12)
        assert out.theta == pytest.approx(math.pi / 2.0 + 0.5, abs=1e-12)

    def test_zero_command_is_identity(self):
        pose = Pose2D(0.3, -0.7, 1.1)
        out = step_unicycle(pose, ControlInput(0.0, 0.0), 0.05)
        assert out == pose

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            step_unicycle(Pose2D(0, 0, 0), ControlInput(1.0, 0.0), 0.0)


class TestAdvance:
    def test_linear_interpolation(self):
        a = make_agent("a", [(0.0, 0.0, 0.0), (1.0, 1.0, 0.0)])
        world = quiet_world([a])
        advance(world, 0.5)
        assert (a.pose.x, a.pose.y) == pytest.approx((0.5, 0.0))

    def test_holds_final_pose(self):
        a = make_agent("a", [(0.0, 0.0, 0.0), (1.0, 1.0, 0.0)])
        world = quiet_world([a])
        advance(world, 5.0)
        assert (a.pose.x, a.pose.y) == (1.0, 0.0)

    def test_agents_move_independently(self):
        a = make_agent("a", [(0.0, 0.0, 0.0), (2.0, 2.0, 0.0)])
        b = make_agent("b", [(0.0, 0.0, 2.0), (2.0, 2.0, 0.0)])
        world = quiet_world([a, b])
        advance(world, 1.0)
        assert (a.pose.x, a.pose.y) == pytest.approx((1.0, 0.0))
        assert (b.pose.x, b.pose.y) == pytest.approx((1.0, 1.0))

    def test_waypoint_times_must_increase(self):
        with pytest.raises(ValueError):
            make_agent("bad", [(0.0, 0.0, 0.0), (0.0, 1.0, 0.0)])


class TestLidar:
    def test_empty_world_empty_scan(self):
        scan = simulate_lidar(quiet_world(), Pose2D(0, 0, 0), 1)
        assert len(scan.points) == 0

    def test_disk_ranges_match_analytic_oracle(self):
        a = make_agent("a", [(0.0, 2.0, 0.0)], radius=0.2)
        world = quiet_world([a])
        scan = simulate_lidar(world, Pose2D(0, 0, 0), 1)
        assert len(scan.points) > 0
        assert np.all(scan.points[:, 0] >= 1.8 - 1e-9)
        assert np.all(scan.points[:, 0] <= 2.0 + 1e-9)
        for r, alpha in scan.points:
            expect = ray_circle_range((0.0, 0.0), (math.cos(alpha), math.sin(alpha)), (2.0, 0.0), 0.2)
            assert expect is not None
            assert abs(r - expect) <= 1e-9

    def test_occluder_blocks_target(self):
        near = make_agent("near", [(0.0, 1.0, 0.0)], radius=0.3)
        far = make_agent("far", [(0.0, 2.5, 0.0)], radius=0.2)
        world = quiet_world([near, far])
        scan = simulate_lidar(world, Pose2D(0, 0, 0), 1)
        assert "far" not in set(scan.source_ids)

    def test_segment_obstacle_hit(self):
        world = quiet_world(obstacles=[((2.0, -1.0), (2.0, 1.0))])
        scan = simulate_lidar(world, Pose2D(0, 0, 0), 1)
        forward = scan.points[np.isclose(scan.points[:, 1], 0.0)]
        assert len(forward) == 1
        assert forward[0, 0] == pytest.approx(2.0, abs=1e-9)

    def test_deterministic_given_seed(self):
        a = make_agent("a", [(0.0, 2.0, 0.0)])
        world = quiet_world([a])
        world.lidar = LidarParams(sigma_r=0.02)
        s1 = simulate_lidar(world, Pose2D(0, 0, 0), [7, 1, 3])
        s2 = simulate_lidar(world, Pose2D(0, 0, 0), [7, 1, 3])
        assert np.array_equal(s1.points, s2.points)


class TestCamera:
    def test_agent_behind_robot_not_detected(self):
        a = make_agent("a", [(0.0, -2.0, 0.0)])
        dets = simulate_camera(quiet_world([a]), Pose2D(0, 0, 0), 1)
        assert dets == []

    def test_depth_beyond_range_not_detected(self):
        a = make_agent("a", [(0.0, 4.0, 0.0)])
        dets = simulate_camera(quiet_world([a]), Pose2D(0, 0, 0), 1)
        assert dets == []

    def test_on_axis_pinhole_projection(self):
        a = make_agent("a", [(0.0, 2.0, 0.0)])
        world = quiet_world([a])
        dets = simulate_camera(world, Pose2D(0, 0, 0), 1)
        assert len(dets) == 1
        det = dets[0]
        assert det.centroid_c == pytest.approx((0.0, 0.0, 2.0), abs=1e-12)
        assert det.bbox_center[0] == pytest.approx(world.camera.cx, abs=1e-9)
        assert det.agent_truth == "a"

    def test_occlusion_by_other_agent(self):
        blocker = make_agent("blocker", [(0.0, 1.0, 0.0)], radius=0.3)
        target = make_agent("target", [(0.0, 2.0, 0.0)])
        dets = simulate_camera(quiet_world([blocker, target]), Pose2D(0, 0, 0), 1)
        assert [d.agent_truth for d in dets] == ["blocker"]

    def test_bbox_width_monotone_in_depth(self):
        widths = []
        for depth in (0.6, 1.0, 1.5, 2.0, 2.5, 2.9):
            a = make_agent("a", [(0.0, depth, 0.0)])
            dets = simulate_camera(quiet_world([a]), Pose2D(0, 0, 0), 1)
            widths.append(dets[0].bbox[2])
        assert all(b <= a for a, b in zip(widths, widths[1:]))

    def test_deterministic_given_seed(self):
        a = make_agent("a", [(0.0, 2.0, 0.0)])
        world = WorldState(agents=[a], lidar=LidarParams(), camera=CameraParams())
        d1 = simulate_camera(world, Pose2D(0, 0, 0), [3, 2, 9])
        d2 = simulate_camera(world, Pose2D(0, 0, 0), [3, 2, 9])
        assert len(d1) == len(d2)
        for x, y in zip(d1, d2):
            assert x.bbox == y.bbox
            assert np.array_equal(x.embedding, y.embedding)


class TestImageTracker:
    def test_tracks_with_drift_and_resets(self):
        a = make_agent("a", [(0.0, 2.0, 0.0)])
        world = quiet_world([a])
        det = simulate_camera(world, Pose2D(0, 0, 0), 1)[0]
        sim = ImageTrackerSim(drift_sigma_px=2.0, camera=world.camera)
        sim.reset()
        rng = np.random.default_rng(0)
        out = sim.step(det, rng)
        assert out is not None
        assert out.bbox[0] != det.bbox[0]  # drift applied
        sim.reset()
        assert sim.du == 0.0 and sim.dv == 0.0

    def test_reports_loss_without_target(self):
        sim = ImageTrackerSim(drift_sigma_px=2.0, camera=CameraParams())
        sim.reset()
        assert sim.step(None, np.random.default_rng(0)) is None
        sim.deactivate()
        assert sim.step(None, np.random.default_rng(0)) is None
