"""Deterministic scripted world: unicycle robot kinematics, waypoint-driven
agents, static segment obstacles, and synthetic LIDAR / camera / image-tracker
sensors.

Sensors are pure functions of (world state, robot pose, RNG seed); identical
scenario and seed streams reproduce bit-identical measurement sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D, normalize_angle

__all__ = [
    "ControlInput",
    "Agent",
    "Scan",
    "Detection",
    "LidarParams",
    "CameraParams",
    "WorldState",
    "step_unicycle",
    "advance",
    "simulate_lidar",
    "simulate_camera",
    "ImageTrackerSim",
]


@dataclass(frozen=True)
class ControlInput:
    """Longitudinal and angular velocity command."""

    v: float
    omega: float


def step_unicycle(s: Pose2D, u: ControlInput, dt: float) -> Pose2D:
    """Forward-Euler unicycle step over ``dt`` seconds."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return Pose2D(
        s.x + math.cos(s.theta) * dt * u.v,
        s.y + math.sin(s.theta) * dt * u.v,
        normalize_angle(s.theta + dt * u.omega),
    )


@dataclass
class Agent:
    """Scripted walker: waypoints (t, x, y) with strictly increasing times."""

    agent_id: str
    role: str  # "leader" or "pedestrian"
    waypoints: list[tuple[float, float, float]]
    body_radius: float = 0.25
    embedding_mean: np.ndarray | None = None
    pose: Pose2D = field(default=Pose2D(0.0, 0.0, 0.0))

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError(f"agent '{self.agent_id}' has no waypoints")
        times = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"agent '{self.agent_id}' waypoint times must strictly increase")
        if self.body_radius <= 0.0:
            raise ValueError("body_radius must be positive")
        self.pose = self.pose_at(0.0)

    def pose_at(self, t: float) -> Pose2D:
        wps = self.waypoints
        if len(wps) == 1 or t <= wps[0][0]:
            x, y = wps[0][1], wps[0][2]
            return Pose2D(x, y, self._segment_heading(0))
        if t >= wps[-1][0]:
            x, y = wps[-1][1], wps[-1][2]
            return Pose2D(x, y, self._segment_heading(len(wps) - 2))
        hi = 1
        while wps[hi][0] < t:
            hi += 1
        lo = hi - 1
        f = (t - wps[lo][0]) / (wps[hi][0] - wps[lo][0])
        x = wps[lo][1] + f * (wps[hi][1] - wps[lo][1])
        y = wps[lo][2] + f * (wps[hi][2] - wps[lo][2])
        return Pose2D(x, y, self._segment_heading(lo))

    def _segment_heading(self, i: int) -> float:
        wps = self.waypoints
        if len(wps) < 2:
            return 0.0
        i = min(max(i, 0), len(wps) - 2)
        # Walk forward to the first segment with actual displacement.
        for j in list(range(i, len(wps) - 1)) + list(range(i - 1, -1, -1)):
            dx = wps[j + 1][1] - wps[j][1]
            dy = wps[j + 1][2] - wps[j][2]
            if abs(dx) > 1e-12 or abs(dy) > 1e-12:
                return math.atan2(dy, dx)
        return 0.0


@dataclass
class Scan:
    """Polar range scan in frame L: columns (r, alpha), alpha increasing."""

    timestamp: float
    points: np.ndarray  # shape (n, 2)
    source_ids: list[str] | None = None  # simulator truth tags, metrics only


@dataclass(frozen=True)
class Detection:
    """Camera detection: pixel bounding box, metric centroid in C, embedding."""

    timestamp: float
    bbox: tuple[float, float, float, float]  # (x, y, w, h), top-left origin
    centroid_c: tuple[float, float, float]   # (x_c, y_c, z_c), z forward
    embedding: np.ndarray
    agent_truth: str  # ground truth tag, metrics / sensor simulation only

    @property
    def bbox_center(self) -> tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + 0.5 * w, y + 0.5 * h)

    @property
    def area(self) -> float:
        return self.bbox[2] * self.bbox[3]


@dataclass(frozen=True)
class LidarParams:
    resolution_deg: float = 0.5
    sigma_r: float = 0.01
    r_max: float = 40.0


@dataclass(frozen=True)
class CameraParams:
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

    @property
    def fx(self) -> float:
        return 0.5 * self.image_width / math.tan(0.5 * math.radians(self.fov_deg))

    @property
    def cx(self) -> float:
        return 0.5 * self.image_width

    @property
    def cy(self) -> float:
        return 0.5 * self.image_height


@dataclass
class WorldState:
    agents: list[Agent]
    obstacles: list[tuple[tuple[float, float], tuple[float, float]]] = field(default_factory=list)
    lidar: LidarParams = field(default_factory=LidarParams)
    camera: CameraParams = field(default_factory=CameraParams)
    time: float = 0.0


def advance(world: WorldState, dt: float) -> WorldState:
    """Move every scripted agent to its pose at ``time + dt``.

    Linear interpolation between waypoints; agents hold their final pose past
    the end of their script.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    world.time += dt
    for agent in world.agents:
        agent.pose = agent.pose_at(world.time)
    return world


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def simulate_lidar(world: WorldState, robot_pose: Pose2D, rng) -> Scan:
    """Cast equally spaced rays over [0, 2pi) and return perturbed range hits.

    Each ray keeps the nearest intersection with an agent disk or obstacle
    segment within ``r_max``; rays without a hit are omitted.  Ranges carry
    zero-mean Gaussian noise ``sigma_r`` and are clamped into (0, r_max].
    """
    rng = _as_rng(rng)
    p = world.lidar
    n = int(round(360.0 / p.resolution_deg))
    alphas = np.arange(n) * (2.0 * math.pi / n)
    phis = alphas + robot_pose.theta
    dx = np.cos(phis)
    dy = np.sin(phis)
    best = np.full(n, np.inf)
    best_src = np.full(n, -1, dtype=int)
    sources: list[str] = []

    for agent in world.agents:
        sources.append(agent.agent_id)
        ox = agent.pose.x - robot_pose.x
        oy = agent.pose.y - robot_pose.y
        b = dx * ox + dy * oy
        disc = b * b - (ox * ox + oy * oy - agent.body_radius ** 2)
        ok = disc >= 0.0
        t = np.where(ok, b - np.sqrt(np.where(ok, disc, 0.0)), np.inf)
        hit = ok & (t > 1e-9) & (t < best)
        best = np.where(hit, t, best)
        best_src = np.where(hit, len(sources) - 1, best_src)

    for i, (p1, p2) in enumerate(world.obstacles):
        sources.append(f"obstacle:{i}")
        ex = p2[0] - p1[0]
        ey = p2[1] - p1[1]
        wx = p1[0] - robot_pose.x
        wy = p1[1] - robot_pose.y
        den = dx * ey - dy * ex
        safe = np.abs(den) > 1e-12
        t = np.where(safe, (wx * ey - wy * ex) / np.where(safe, den, 1.0), np.inf)
        u = np.where(safe, (wx * dy - wy * dx) / np.where(safe, den, 1.0), -1.0)
        hit = safe & (t > 1e-9) & (u >= 0.0) & (u <= 1.0) & (t < best)
        best = np.where(hit, t, best)
        best_src = np.where(hit, len(sources) - 1, best_src)

    mask = np.isfinite(best) & (best <= p.r_max)
    idx = np.nonzero(mask)[0]
    ranges = best[idx]
    if len(idx):
        ranges = ranges + rng.normal(0.0, p.sigma_r, size=len(idx))
        ranges = np.clip(ranges, 1e-6, p.r_max)
    points = np.column_stack([ranges, alphas[idx]])
    tags = [sources[best_src[i]] for i in idx]
    return Scan(timestamp=world.time, points=points, source_ids=tags)


def _segment_blocks(a: tuple[float, float], b: tuple[float, float],
                    center: tuple[float, float], radius: float) -> bool:
    """True when the disk intersects the open sight segment a-b."""
    abx = b[0] - a[0]
    aby = b[1] - a[1]
    denom = abx * abx + aby * aby
    if denom < 1e-18:
        return False
    t = ((center[0] - a[0]) * abx + (center[1] - a[1]) * aby) / denom
    t = min(max(t, 0.0), 1.0)
    qx = a[0] + t * abx - center[0]
    qy = a[1] + t * aby - center[1]
    return qx * qx + qy * qy < radius * radius


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return (o1 * o2 < 0.0) and (o3 * o4 < 0.0)


def _occluded(world: WorldState, robot_pose: Pose2D, agent: Agent) -> bool:
    eye = (robot_pose.x, robot_pose.y)
    target = (agent.pose.x, agent.pose.y)
    for other in world.agents:
        if other.agent_id == agent.agent_id:
            continue
        if _segment_blocks(eye, target, (other.pose.x, other.pose.y), other.body_radius):
            return True
    for p1, p2 in world.obstacles:
        if _segments_cross(eye, target, p1, p2):
            return True
    return False


def simulate_camera(world: WorldState, robot_pose: Pose2D, rng) -> list[Detection]:
    """Pin-hole detections for unoccluded agents in the FOV and depth range.

    Depth validity is [depth_min, depth_max]; bounding-box size scales
    inversely with depth; each visible agent is dropped independently with
    probability ``p_miss``.  Embeddings are the agent mean plus isotropic
    Gaussian noise ``sigma_e``.
    """
    rng = _as_rng(rng)
    cam = world.camera
    half_fov = 0.5 * math.radians(cam.fov_deg)
    cth = math.cos(robot_pose.theta)
    sth = math.sin(robot_pose.theta)
    out: list[Detection] = []
    for agent in world.agents:
        rx = agent.pose.x - robot_pose.x
        ry = agent.pose.y - robot_pose.y
        x_l = cth * rx + sth * ry
        y_l = -sth * rx + cth * ry
        z_c = x_l
        x_c = -y_l
        if not (cam.depth_min <= z_c <= cam.depth_max):
            continue
        if abs(math.atan2(x_c, z_c)) > half_fov:
            continue
        if _occluded(world, robot_pose, agent):
            continue
        if rng.random() < cam.p_miss:
            continue
        z_meas = z_c + rng.normal(0.0, cam.sigma_z)
        u_c = cam.cx + cam.fx * x_c / z_c + rng.normal(0.0, cam.sigma_px)
        v_c = cam.cy + rng.normal(0.0, cam.sigma_px)
        w = max(2.0 * agent.body_radius * cam.fx / z_c + rng.normal(0.0, cam.sigma_px), 1.0)
        h = max(cam.body_height * cam.fx / z_c + rng.normal(0.0, cam.sigma_px), 1.0)
        if agent.embedding_mean is None:
            raise ValueError(f"agent '{agent.agent_id}' has no embedding mean")
        emb = agent.embedding_mean + rng.normal(0.0, cam.sigma_e, size=len(agent.embedding_mean))
        x_meas = (u_c - cam.cx) * max(z_meas, 1e-6) / cam.fx
        out.append(
            Detection(
                timestamp=world.time,
                bbox=(u_c - 0.5 * w, v_c - 0.5 * h, w, h),
                centroid_c=(x_meas, 0.0, z_meas),
                embedding=emb,
                agent_truth=agent.agent_id,
            )
        )
    return out


class ImageTrackerSim:
    """Pixel-domain stand-in for the frame-to-frame appearance tracker.

    Between re-detections the tracker follows the target's true bounding box
    while accumulating a random-walk pixel offset (the drift every real
    tracker shows on long sequences); it reports loss whenever the target has
    no camera detection.  The offset resets on each successful re-detection.
    """

    def __init__(self, drift_sigma_px: float, camera: CameraParams):
        self.drift_sigma_px = drift_sigma_px
        self.camera = camera
        self.du = 0.0
        self.dv = 0.0
        self.active = False

    def reset(self):
        self.du = 0.0
        self.dv = 0.0
        self.active = True

    def deactivate(self):
        self.active = False

    def step(self, true_detection: Detection | None, rng) -> Detection | None:
        if not self.active or true_detection is None:
            return None
        rng = _as_rng(rng)
        self.du += rng.normal(0.0, self.drift_sigma_px)
        self.dv += rng.normal(0.0, self.drift_sigma_px)
        d = true_detection
        x, y, w, h = d.bbox
        z = d.centroid_c[2]
        x_c = d.centroid_c[0] + self.du * z / self.camera.fx
        return Detection(
            timestamp=d.timestamp,
            bbox=(x + self.du, y + self.dv, w, h),
            centroid_c=(x_c, d.centroid_c[1], z),
            embedding=d.embedding,
            agent_truth=d.agent_truth,
        )
