"""Scenario ingestion, the perception -> fusion -> tracking -> path -> control
loop, run metrics, and output writers.

Runs are deterministic: every random draw comes from a generator seeded by
``(scenario seed, stream id, step index)``, iteration orders are fixed, and
logs hold plain Python floats, so identical scenarios reproduce byte-identical
``run.json`` files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from .clothoid import SplineBuildError
from .control import ControllerConfig, PathFollower
from .fusion import FusionConfig, FusionMode, FusionState, cluster_scan, camera_to_lidar, fuse_step
from .geometry import FrameTransform, Pose2D, normalize_angle, parent_to_local, relative_pose
from .pathbuild import PathBuilder, PathConfig
from .recognition import (
    InitialisationError,
    Phase,
    RecognitionState,
    following_step,
    load_negative_pool,
    run_initialisation,
)
from .scenarios import bundled_names, bundled_scenario
from .tracking import (
    Measurement,
    NumericalFault,
    TrackerConfig,
    check_fault,
    gpb1_step,
    initial_estimate,
    local_to_world,
)
from .world import (
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

__all__ = [
    "ScenarioError",
    "Scenario",
    "RunLog",
    "load_scenario",
    "save_scenario",
    "apply_overrides",
    "run",
    "compute_metrics",
    "write_outputs",
    "load_runlog",
]

# RNG stream ids; each stream is seeded as (seed, stream[, step]).
_STREAM_LIDAR = 1
_STREAM_CAMERA = 2
_STREAM_TRACKER = 3
_STREAM_NEGATIVE = 4
_STREAM_EMBED = 5
_STREAM_POOL = 6
_STREAM_ODO = 7


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class AgentSpec:
    id: str
    role: str
    waypoints: tuple
    body_radius: float = 0.25
    embedding_mean: tuple | None = None


@dataclass(frozen=True)
class SensorParams:
    lidar_resolution_deg: float = 0.5
    sigma_r: float = 0.01
    r_max: float = 40.0
    fov_deg: float = 70.0
    image_width: int = 640
    image_height: int = 480
    depth_min: float = 0.5
    depth_max: float = 3.0
    sigma_px: float = 1.0
    sigma_z: float = 0.02
    sigma_e: float = 0.05
    p_miss: float = 0.02
    body_height: float = 1.7
    mount: tuple = (0.0, 0.0, 0.0)
    odometry_sigma_xy: float = 0.0
    odometry_sigma_theta: float = 0.0


@dataclass(frozen=True)
class RecognitionParams:
    k: int = 5
    drift_tuning: float = 0.05
    init_window: float = 5.0
    init_min_fraction: float = 0.8
    negative_cap: int = 500
    redetect_period: int = 10
    tracker_drift_px: float = 2.0


@dataclass(frozen=True)
class EmbeddingParams:
    dim: int = 64
    separation: float = 1.0


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    duration: float = 20.0
    dt: float = 0.05
    seed: int = 0
    robot_start: tuple = (0.0, 0.0, 0.0)
    v_max: float = 1.5
    omega_max: float = 2.5
    agents: tuple = ()
    obstacles: tuple = ()
    sensors: SensorParams = field(default_factory=SensorParams)
    embedding: EmbeddingParams = field(default_factory=EmbeddingParams)
    negative_pool: int | str = 200
    recognition: RecognitionParams = field(default_factory=RecognitionParams)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    path: PathConfig = field(default_factory=PathConfig)
    control: ControllerConfig = field(default_factory=ControllerConfig)


@dataclass
class RunLog:
    scenario: dict
    status: str
    records: list[dict]
    final_spline: list[dict]
    metrics: dict = field(default_factory=dict)


def _coerce(value, annotation):
    if annotation is float:
        return float(value)
    if annotation is int:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"expected integer, got {value}")
        return int(value)
    if annotation is str:
        return str(value)
    return value


def _build_section(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ScenarioError(f"section '{section}' must be an object")
    allowed = {f.name: f for f in dc_fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            raise ScenarioError(f"unknown key '{key}' in '{section}'")
        ann = allowed[key].type
        try:
            if ann in ("float", float):
                value = float(value)
            elif ann in ("int", int):
                value = _coerce(value, int)
            elif key == "transition":
                value = tuple(tuple(float(x) for x in row) for row in value)
            elif key == "mount":
                value = tuple(float(x) for x in value)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad value for '{section}.{key}': {exc}") from exc
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid '{section}': {exc}") from exc


_TOP_KEYS = {
    "name", "duration", "dt", "seed", "robot_start", "v_max", "omega_max",
    "agents", "obstacles", "sensors", "embedding", "negative_pool", "modules",
}
_MODULE_SECTIONS = {
    "recognition": RecognitionParams,
    "fusion": FusionConfig,
    "tracker": TrackerConfig,
    "path": PathConfig,
    "control": ControllerConfig,
}
_AGENT_KEYS = {"id", "role", "waypoints", "body_radius", "embedding_mean"}


def load_scenario(source) -> Scenario:
    """Build a validated scenario from a dict, a JSON file path, or a name.

    Unknown keys are rejected with the offending key named; the scenario must
    contain exactly one leader agent and a positive time step.
    """
    if isinstance(source, Scenario):
        return source
    if isinstance(source, (str, Path)):
        name = str(source)
        if name in bundled_names():
            data = bundled_scenario(name)
        else:
            with open(source, "r", encoding="utf-8") as handle:
                data = json.load(handle)
    else:
        data = source
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")

    for key in data:
        if key not in _TOP_KEYS:
            raise ScenarioError(f"unknown key '{key}' in scenario")

    kwargs = {}
    for key in ("name",):
        if key in data:
            kwargs[key] = str(data[key])
    for key in ("duration", "dt", "v_max", "omega_max"):
        if key in data:
            kwargs[key] = float(data[key])
    if "seed" in data:
        kwargs["seed"] = _coerce(data["seed"], int)
    if "robot_start" in data:
        rs = data["robot_start"]
        if not (isinstance(rs, (list, tuple)) and len(rs) == 3):
            raise ScenarioError("robot_start must be [x, y, theta]")
        kwargs["robot_start"] = tuple(float(v) for v in rs)
    if "negative_pool" in data:
        npool = data["negative_pool"]
        if not isinstance(npool, (int, str)):
            raise ScenarioError("negative_pool must be a size or a file path")
        kwargs["negative_pool"] = npool

    agents = []
    for i, spec in enumerate(data.get("agents", [])):
        if not isinstance(spec, dict):
            raise ScenarioError(f"agent #{i} must be an object")
        for key in spec:
            if key not in _AGENT_KEYS:
                raise ScenarioError(f"unknown key '{key}' in agent '{spec.get('id', i)}'")
        if "id" not in spec or "waypoints" not in spec:
            raise ScenarioError(f"agent #{i} needs 'id' and 'waypoints'")
        role = spec.get("role", "pedestrian")
        if role not in ("leader", "pedestrian"):
            raise ScenarioError(f"agent '{spec['id']}': unknown role '{role}'")
        wps = tuple(tuple(float(v) for v in w) for w in spec["waypoints"])
        if any(len(w) != 3 for w in wps):
            raise ScenarioError(f"agent '{spec['id']}': waypoints must be [t, x, y]")
        emb = spec.get("embedding_mean")
        agents.append(
            AgentSpec(
                id=str(spec["id"]),
                role=role,
                waypoints=wps,
                body_radius=float(spec.get("body_radius", 0.25)),
                embedding_mean=tuple(float(v) for v in emb) if emb is not None else None,
            )
        )
    kwargs["agents"] = tuple(agents)

    obstacles = []
    for i, seg in enumerate(data.get("obstacles", [])):
        try:
            (x1, y1), (x2, y2) = seg
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"obstacle #{i} must be [[x1,y1],[x2,y2]]") from exc
        obstacles.append(((float(x1), float(y1)), (float(x2), float(y2))))
    kwargs["obstacles"] = tuple(obstacles)

    if "sensors" in data:
        kwargs["sensors"] = _build_section(SensorParams, data["sensors"], "sensors")
    if "embedding" in data:
        kwargs["embedding"] = _build_section(EmbeddingParams, data["embedding"], "embedding")
    modules = data.get("modules", {})
    if not isinstance(modules, dict):
        raise ScenarioError("'modules' must be an object")
    for key, payload in modules.items():
        if key not in _MODULE_SECTIONS:
            raise ScenarioError(f"unknown key '{key}' in 'modules'")
        kwargs[key] = _build_section(_MODULE_SECTIONS[key], payload, f"modules.{key}")

    scenario = Scenario(**kwargs)
    _validate(scenario)
    return scenario


def _validate(sc: Scenario):
    if sc.dt <= 0.0:
        raise ScenarioError("dt must be positive")
    if sc.duration <= 0.0:
        raise ScenarioError("duration must be positive")
    leaders = [a for a in sc.agents if a.role == "leader"]
    if len(leaders) != 1:
        raise ScenarioError(f"scenario needs exactly one leader, found {len(leaders)}")
    for a in sc.agents:
        times = [w[0] for w in a.waypoints]
        if any(b <= x for x, b in zip(times, times[1:])):
            raise ScenarioError(f"agent '{a.id}': waypoint times must strictly increase")
        if a.body_radius <= 0.0:
            raise ScenarioError(f"agent '{a.id}': body_radius must be positive")
    if isinstance(sc.negative_pool, int) and sc.negative_pool <= 0:
        raise ScenarioError("negative_pool size must be positive")


def save_scenario(sc: Scenario) -> dict:
    """Scenario as a JSON-ready dict with every default made explicit."""

    def as_dict(obj):
        out = {}
        for f in dc_fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, tuple):
                v = [list(r) if isinstance(r, tuple) else r for r in v]
            out[f.name] = v
        return out

    return {
        "name": sc.name,
        "duration": sc.duration,
        "dt": sc.dt,
        "seed": sc.seed,
        "robot_start": list(sc.robot_start),
        "v_max": sc.v_max,
        "omega_max": sc.omega_max,
        "agents": [
            {
                "id": a.id,
                "role": a.role,
                "waypoints": [list(w) for w in a.waypoints],
                "body_radius": a.body_radius,
                **(
                    {"embedding_mean": list(a.embedding_mean)}
                    if a.embedding_mean is not None
                    else {}
                ),
            }
            for a in sc.agents
        ],
        "obstacles": [[list(p) for p in seg] for seg in sc.obstacles],
        "sensors": as_dict(sc.sensors),
        "embedding": as_dict(sc.embedding),
        "negative_pool": sc.negative_pool,
        "modules": {
            "recognition": as_dict(sc.recognition),
            "fusion": as_dict(sc.fusion),
            "tracker": as_dict(sc.tracker),
            "path": as_dict(sc.path),
            "control": as_dict(sc.control),
        },
    }


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides to a scenario dict."""
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override '{item}' is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"override '{key}' crosses a non-object")
        node[parts[-1]] = value
    return data


def _build_world(sc: Scenario) -> tuple[WorldState, str]:
    agents = []
    for i, spec in enumerate(sc.agents):
        if spec.embedding_mean is not None:
            mean = np.asarray(spec.embedding_mean, dtype=float)
        else:
            rng = np.random.default_rng([sc.seed, _STREAM_EMBED, i])
            v = rng.normal(size=sc.embedding.dim)
            mean = v / np.linalg.norm(v) * sc.embedding.separation
        agents.append(
            Agent(
                agent_id=spec.id,
                role=spec.role,
                waypoints=[tuple(w) for w in spec.waypoints],
                body_radius=spec.body_radius,
                embedding_mean=mean,
            )
        )
    world = WorldState(
        agents=agents,
        obstacles=[(tuple(a), tuple(b)) for a, b in sc.obstacles],
        lidar=LidarParams(
            resolution_deg=sc.sensors.lidar_resolution_deg,
            sigma_r=sc.sensors.sigma_r,
            r_max=sc.sensors.r_max,
        ),
        camera=CameraParams(
            fov_deg=sc.sensors.fov_deg,
            image_width=sc.sensors.image_width,
            image_height=sc.sensors.image_height,
            depth_min=sc.sensors.depth_min,
            depth_max=sc.sensors.depth_max,
            sigma_px=sc.sensors.sigma_px,
            sigma_z=sc.sensors.sigma_z,
            sigma_e=sc.sensors.sigma_e,
            p_miss=sc.sensors.p_miss,
            body_height=sc.sensors.body_height,
        ),
    )
    leader_id = next(a.id for a in sc.agents if a.role == "leader")
    return world, leader_id


def _negative_pool(sc: Scenario) -> list[np.ndarray]:
    if isinstance(sc.negative_pool, str):
        return load_negative_pool(sc.negative_pool)
    rng = np.random.default_rng([sc.seed, _STREAM_POOL])
    vecs = rng.normal(size=(sc.negative_pool, sc.embedding.dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return list(vecs * sc.embedding.separation)


def _feedback_pixels(est_world, robot_pose: Pose2D, cam: CameraParams):
    lx, ly = parent_to_local(robot_pose, (float(est_world[0]), float(est_world[1])))
    if lx <= 0.05:
        return None
    return (cam.cx + cam.fx * (-ly) / lx, cam.cy)


def run(scenario: Scenario | dict | str) -> RunLog:
    """Execute a scenario: bootstrap, then the full per-step pipeline.

    The initialisation window only ever commands (0, 0); afterwards each step
    advances the world, senses, recognises, fuses, tracks, extends the path,
    and drives the robot.  A tracking fault (or failed bootstrap) halts the
    run with status ``fault`` and a final zero command.
    """
    sc = load_scenario(scenario)
    world, leader_id = _build_world(sc)
    pool = _negative_pool(sc)
    cam_mount = FrameTransform(*sc.sensors.mount)
    dt = sc.dt
    n_steps = int(round(sc.duration / dt))
    n_init = int(round(sc.recognition.init_window / dt))

    robot = Pose2D(*sc.robot_start).normalized()
    prev_robot = robot
    rec_state = RecognitionState(init_deadline=sc.recognition.init_window)
    knn = None
    fusion_state = FusionState()
    est = None
    builder = PathBuilder(sc.path)
    follower = PathFollower(sc.control, v_max=sc.v_max, omega_max=sc.omega_max)
    tracker_sim = ImageTrackerSim(sc.recognition.tracker_drift_px, world.camera)
    meas_R = np.diag([sc.tracker.measurement_sigma ** 2] * 2)

    init_frames: list[list] = []
    init_times: list[float] = []
    records: list[dict] = []
    status = "completed"
    fused_feedback = None
    follow_k = 0

    for k in range(n_steps):
        advance(world, dt)
        t = world.time
        motion = relative_pose(prev_robot, robot)
        if sc.sensors.odometry_sigma_xy > 0.0 or sc.sensors.odometry_sigma_theta > 0.0:
            rng = np.random.default_rng([sc.seed, _STREAM_ODO, k])
            motion = Pose2D(
                motion.x + rng.normal(0.0, sc.sensors.odometry_sigma_xy),
                motion.y + rng.normal(0.0, sc.sensors.odometry_sigma_xy),
                normalize_angle(motion.theta + rng.normal(0.0, sc.sensors.odometry_sigma_theta)),
            )

        scan = simulate_lidar(world, robot, np.random.default_rng([sc.seed, _STREAM_LIDAR, k]))
        detections = simulate_camera(
            world, robot, np.random.default_rng([sc.seed, _STREAM_CAMERA, k])
        )
        clusters = cluster_scan(scan, sc.fusion.cluster_distance, sc.fusion.min_points)

        in_init = k < n_init
        fault = False
        cam_det = None
        if in_init:
            init_frames.append(detections)
            init_times.append(t)
            if detections:
                cam_det = max(detections, key=lambda d: d.area)
        else:
            if knn is None:
                try:
                    knn = run_initialisation(
                        init_frames,
                        pool,
                        np.random.default_rng([sc.seed, _STREAM_NEGATIVE]),
                        k=sc.recognition.k,
                        min_frame_fraction=sc.recognition.init_min_fraction,
                        negative_cap=sc.recognition.negative_cap,
                    )
                except InitialisationError:
                    status = "fault"
                    records.append(
                        _record(t, k, "init", robot, ControlInput(0.0, 0.0), world,
                                leader_id, fusion_state, None, None, None, est,
                                builder, None, [], [])
                    )
                    break
                for frame, ft in zip(reversed(init_frames), reversed(init_times)):
                    if frame:
                        best = max(frame, key=lambda d: d.area)
                        rec_state.last_bbox = best.bbox
                        rec_state.last_detection_time = ft
                        break
                rec_state.phase = Phase.FOLLOWING
            if rec_state.last_bbox is not None:
                if follow_k % sc.recognition.redetect_period == 0:
                    cam_det = following_step(
                        detections, rec_state, knn, t,
                        sc.recognition.drift_tuning, fused_feedback,
                    )
                    if cam_det is not None:
                        tracker_sim.reset()
                    else:
                        tracker_sim.deactivate()
                else:
                    true_det = next(
                        (d for d in detections if d.agent_truth == leader_id), None
                    )
                    cam_det = tracker_sim.step(
                        true_det, np.random.default_rng([sc.seed, _STREAM_TRACKER, k])
                    )
                    if cam_det is not None:
                        rec_state.last_bbox = cam_det.bbox
            follow_k += 1

        camera_point = (
            camera_to_lidar(cam_det.centroid_c, cam_mount) if cam_det is not None else None
        )
        result = fuse_step(clusters, camera_point, fusion_state, motion, sc.fusion)
        fusion_state = result.state
        meas_local = result.measurement

        meas_truth = None
        if meas_local is not None:
            tags = set()
            if result.cluster is not None and result.cluster.truth_id is not None:
                tags.add(result.cluster.truth_id)
            if result.camera_used and cam_det is not None:
                tags.add(cam_det.agent_truth)
            if len(tags) == 1:
                meas_truth = tags.pop()
            elif len(tags) > 1:
                meas_truth = "conflict"

        meas_world = None
        try:
            if meas_local is not None:
                meas_world = local_to_world(meas_local, robot)
                z = Measurement(np.asarray(meas_world), meas_R, t)
                est = gpb1_step(est, z, dt, sc.tracker) if est is not None else (
                    initial_estimate(z, sc.tracker)
                )
            elif est is not None:
                est = gpb1_step(est, None, dt, sc.tracker)
        except NumericalFault:
            fault = True
        if est is not None and not fault:
            fault = check_fault(est, sc.tracker.fault_limit)

        if est is not None:
            fused_feedback = _feedback_pixels(est.fused_position, robot, world.camera)
        admitted = False
        if meas_local is not None and est is not None and not fault:
            try:
                admitted = builder.offer(
                    (float(est.fused_position[0]), float(est.fused_position[1])), t
                )
            except SplineBuildError:
                fault = True
        if admitted:
            follower.set_spline(builder.spline, builder.version)

        events: list = []
        telemetry = None
        if in_init or fault:
            cmd = ControlInput(0.0, 0.0)
            follower.v_prev = 0.0
        else:
            obstacle_pts = []
            exclude = fusion_state.leader_local
            for cl in clusters:
                c = cl.centroid
                if exclude is not None and math.hypot(
                    c[0] - exclude[0], c[1] - exclude[1]
                ) <= 2.0 * sc.fusion.gate:
                    continue
                obstacle_pts.append(local_to_world(c, robot))
            leader_world = (
                (float(est.fused_position[0]), float(est.fused_position[1]))
                if est is not None
                else None
            )
            cmd, telemetry, events = follower.step(robot, leader_world, obstacle_pts, dt, t)

        records.append(
            _record(t, k, "init" if in_init else "following", robot, cmd, world,
                    leader_id, fusion_state, meas_local, meas_world, meas_truth,
                    est, builder, telemetry, events,
                    [d.agent_truth for d in detections])
        )

        if fault:
            status = "fault"
            break
        prev_robot = robot
        robot = step_unicycle(robot, cmd, dt)

    final_spline = builder.spline.to_dicts() if builder.spline is not None else []
    log = RunLog(
        scenario=save_scenario(sc),
        status=status,
        records=records,
        final_spline=final_spline,
    )
    log.metrics = compute_metrics(log)
    return log


def _record(t, step, phase, robot, cmd, world, leader_id, fusion_state,
            meas_local, meas_world, meas_truth, est, builder, telemetry,
            events, camera_sees):
    leader = next(a for a in world.agents if a.agent_id == leader_id)
    rec = {
        "t": float(t),
        "step": int(step),
        "phase": phase,
        "robot": [float(robot.x), float(robot.y), float(robot.theta)],
        "cmd": [float(cmd.v), float(cmd.omega)],
        "leader_truth": [float(leader.pose.x), float(leader.pose.y)],
        "truth": {
            a.agent_id: [float(a.pose.x), float(a.pose.y)] for a in world.agents
        },
        "mode": fusion_state.mode.value,
        "meas_local": [float(meas_local[0]), float(meas_local[1])] if meas_local else None,
        "meas_world": [float(meas_world[0]), float(meas_world[1])] if meas_world else None,
        "meas_truth": meas_truth,
        "est": (
            [float(est.fused_position[0]), float(est.fused_position[1])]
            if est is not None
            else None
        ),
        "mu": [float(est.mu[0]), float(est.mu[1])] if est is not None else None,
        "cov_trace": float(np.trace(est.fused_cov_pos)) if est is not None else None,
        "spline_version": int(builder.version),
        "spline_length": float(builder.spline.total_length) if builder.spline else 0.0,
        "dataset_size": len(builder.dataset.points),
        "events": [[e.kind, float(e.timestamp)] for e in events],
        "camera_sees": list(camera_sees),
    }
    if telemetry is not None:
        rec["lateral"] = float(telemetry["lateral"])
        rec["gap"] = float(telemetry["gap"])
        rec["scale"] = float(telemetry["scale"])
    else:
        rec["lateral"] = None
        rec["gap"] = None
        rec["scale"] = None
    return rec


def _polyline_distances(points: np.ndarray, poly: np.ndarray):
    """Distance of each point to the polyline plus an interior-projection flag.

    A projection is interior when the nearest polyline point is not one of the
    two polyline endpoints; distances to clamped endpoint projections measure
    longitudinal approach gaps, not lateral deviation.
    """
    seg_a = poly[:-1]
    seg_d = poly[1:] - poly[:-1]
    seg_len2 = np.sum(seg_d ** 2, axis=1)
    seg_len2 = np.where(seg_len2 < 1e-18, 1e-18, seg_len2)
    cum = np.concatenate([[0.0], np.cumsum(np.sqrt(np.sum(seg_d ** 2, axis=1)))])
    total = float(cum[-1])
    dists = np.empty(len(points))
    interior = np.empty(len(points), dtype=bool)
    for i, p in enumerate(points):
        tt = np.clip(np.sum((p - seg_a) * seg_d, axis=1) / seg_len2, 0.0, 1.0)
        proj = seg_a + tt[:, None] * seg_d
        d2 = np.sum((proj - p) ** 2, axis=1)
        j = int(np.argmin(d2))
        dists[i] = math.sqrt(float(d2[j]))
        s_loc = float(cum[j]) + float(tt[j]) * math.sqrt(float(seg_len2[j]))
        interior[i] = 1e-9 < s_loc < total - 1e-9
    return dists, interior


def compute_metrics(log: RunLog) -> dict:
    """Deterministic run metrics computed purely from the log records."""
    records = log.records
    leader_poly = []
    for r in records:
        p = r["leader_truth"]
        if not leader_poly or math.hypot(
            p[0] - leader_poly[-1][0], p[1] - leader_poly[-1][1]
        ) > 1e-9:
            leader_poly.append((p[0], p[1]))

    lateral = {"max": None, "p95": None, "rms": None, "count": 0}
    if len(leader_poly) >= 2 and records:
        robot_pts = np.asarray([r["robot"][:2] for r in records])
        dists, interior = _polyline_distances(robot_pts, np.asarray(leader_poly))
        sel = dists[interior]
        if len(sel):
            lateral = {
                "max": float(np.max(sel)),
                "p95": float(np.percentile(sel, 95)),
                "rms": float(np.sqrt(np.mean(sel ** 2))),
                "count": int(len(sel)),
            }

    err2 = []
    mu_sum = np.zeros(2)
    mu_count = 0
    for r in records:
        if r["est"] is not None:
            dx = r["est"][0] - r["leader_truth"][0]
            dy = r["est"][1] - r["leader_truth"][1]
            err2.append(dx * dx + dy * dy)
            mu_sum += np.asarray(r["mu"])
            mu_count += 1
    tracker_rmse = float(np.sqrt(np.mean(err2))) if err2 else None

    leader_id = next(
        a["id"] for a in log.scenario["agents"] if a["role"] == "leader"
    )
    with_meas = [r for r in records if r["meas_truth"] is not None]
    correct = sum(1 for r in with_meas if r["meas_truth"] == leader_id)
    identity_precision = (correct / len(with_meas)) if with_meas else None

    occupancy: dict[str, float] = {}
    for r in records:
        occupancy[r["mode"]] = occupancy.get(r["mode"], 0.0) + 1.0
    if records:
        occupancy = {k: v / len(records) for k, v in occupancy.items()}

    event_counts: dict[str, int] = {}
    for r in records:
        for kind, _ in r["events"]:
            event_counts[kind] = event_counts.get(kind, 0) + 1

    return {
        "status": log.status,
        "steps": len(records),
        "lateral": lateral,
        "tracker_rmse": tracker_rmse,
        "identity_precision": identity_precision,
        "mode_occupancy": dict(sorted(occupancy.items())),
        "mu_mean": (
            [float(mu_sum[0] / mu_count), float(mu_sum[1] / mu_count)]
            if mu_count
            else None
        ),
        "events": dict(sorted(event_counts.items())),
        "final_spline_length": (
            float(records[-1]["spline_length"]) if records else 0.0
        ),
    }


def write_outputs(log: RunLog, out_dir) -> list[Path]:
    """Write run.json, metrics.json, plot-ready CSVs, and the spline export.

    CSV columns: truth_leader.csv (t, x, y); robot.csv (t, x, y, theta, v,
    omega); estimates.csv (t, est_x, est_y, mu_cv, mu_uni, cov_trace, meas_x,
    meas_y, mode).  spline.json holds the final published segment list.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        run_path = out / "run.json"
        with open(run_path, "w", encoding="utf-8") as handle:
            json.dump(
                {
                    "scenario": log.scenario,
                    "status": log.status,
                    "records": log.records,
                    "final_spline": log.final_spline,
                    "metrics": log.metrics,
                },
                handle,
                indent=1,
            )
        metrics_path = out / "metrics.json"
        with open(metrics_path, "w", encoding="utf-8") as handle:
            json.dump(log.metrics, handle, indent=1)

        leader_path = out / "truth_leader.csv"
        with open(leader_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t", "x", "y"])
            for r in log.records:
                writer.writerow([r["t"], r["leader_truth"][0], r["leader_truth"][1]])

        robot_path = out / "robot.csv"
        with open(robot_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t", "x", "y", "theta", "v", "omega"])
            for r in log.records:
                writer.writerow([r["t"], *r["robot"], *r["cmd"]])

        est_path = out / "estimates.csv"
        with open(est_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["t", "est_x", "est_y", "mu_cv", "mu_uni", "cov_trace",
                 "meas_x", "meas_y", "mode"]
            )
            for r in log.records:
                est = r["est"] or ["", ""]
                mu = r["mu"] or ["", ""]
                meas = r["meas_world"] or ["", ""]
                writer.writerow(
                    [r["t"], est[0], est[1], mu[0], mu[1],
                     r["cov_trace"] if r["cov_trace"] is not None else "",
                     meas[0], meas[1], r["mode"]]
                )

        spline_path = out / "spline.json"
        with open(spline_path, "w", encoding="utf-8") as handle:
            json.dump({"segments": log.final_spline}, handle, indent=1)
    except OSError as exc:
        raise OSError(f"writing outputs under '{out}': {exc}") from exc
    return [run_path, metrics_path, leader_path, robot_path, est_path, spline_path]


def load_runlog(path) -> RunLog:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    return RunLog(
        scenario=data["scenario"],
        status=data["status"],
        records=data["records"],
        final_spline=data.get("final_spline", []),
        metrics=data.get("metrics", {}),
    )
