"""Local LIDAR-camera fusion in the robot frame.

Scans are grouped by single-linkage Euclidean clustering with a richness
threshold; camera detections are projected into the LIDAR plane; a small
finite state machine keeps a spatial prior on the leader alive across
single-sensor dropouts and emits one fused local measurement per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .geometry import FrameTransform, Pose2D, project_between_frames, transform_point
from .world import Scan

__all__ = [
    "Cluster",
    "FusionMode",
    "FusionConfig",
    "FusionState",
    "FuseResult",
    "cluster_scan",
    "camera_to_lidar",
    "fuse_step",
]


@dataclass(frozen=True)
class Cluster:
    centroid: tuple[float, float]
    point_count: int
    truth_id: str | None = None  # majority simulator tag, metrics only


class FusionMode(str, Enum):
    BOOTSTRAP = "bootstrap"
    TRACKED_BOTH = "tracked_both"
    TRACKED_LIDAR_ONLY = "tracked_lidar_only"
    TRACKED_CAMERA_ONLY = "tracked_camera_only"
    LOST = "lost"


@dataclass(frozen=True)
class FusionConfig:
    cluster_distance: float = 0.3       # single-linkage chain distance, m
    min_points: int = 4                 # richness threshold
    gate: float = 0.6                   # association radius around the prior, m
    ttl_steps: int = 40                 # both-sensor dropout budget
    boot_steps: int = 20                # consecutive agreements to bootstrap
    # Scan points lie on the front arc of a body disk, so the cluster centroid
    # sits about pi/4 * radius short of the body centre along the bearing.
    centroid_range_offset: float = math.pi / 4.0 * 0.25


@dataclass(frozen=True)
class FusionState:
    mode: FusionMode = FusionMode.BOOTSTRAP
    leader_local: tuple[float, float] | None = None
    frames_since_camera: int = 0
    frames_since_lidar: int = 0
    boot_count: int = 0


@dataclass(frozen=True)
class FuseResult:
    state: FusionState
    measurement: tuple[float, float] | None
    cluster: Cluster | None          # matched cluster, for attribution
    camera_used: bool


def cluster_scan(scan: Scan, d_max: float, n_min: int) -> list[Cluster]:
    """Single-linkage grouping of scan points in Cartesian coordinates.

    Two points share a cluster iff a chain of pairwise distances <= ``d_max``
    connects them; groups smaller than ``n_min`` are dropped.  Centroids are
    arithmetic means; output order follows centroid coordinates so the result
    does not depend on scan point order.
    """
    if d_max <= 0.0:
        raise ValueError("d_max must be positive")
    if n_min < 1:
        raise ValueError("n_min must be at least 1")
    pts = np.asarray(scan.points, dtype=float)
    n = len(pts)
    if n == 0:
        return []
    x = pts[:, 0] * np.cos(pts[:, 1])
    y = pts[:, 0] * np.sin(pts[:, 1])
    xy = np.column_stack([x, y])

    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in cKDTree(xy).query_pairs(d_max, output_type="ndarray").tolist():
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    clusters = []
    for members in groups.values():
        if len(members) < n_min:
            continue
        cx = float(np.mean(xy[members, 0]))
        cy = float(np.mean(xy[members, 1]))
        truth = None
        if scan.source_ids is not None:
            counts: dict[str, int] = {}
            for m in members:
                tag = scan.source_ids[m]
                counts[tag] = counts.get(tag, 0) + 1
            truth = min(counts, key=lambda tag: (-counts[tag], tag))
        clusters.append(Cluster(centroid=(cx, cy), point_count=len(members), truth_id=truth))
    clusters.sort(key=lambda c: c.centroid)
    return clusters


def camera_to_lidar(
    centroid_c: tuple[float, float, float], mount: FrameTransform
) -> tuple[float, float]:
    """Project a camera-frame centroid onto the LIDAR plane and re-mount it.

    Camera z (optical axis) maps to LIDAR +x, camera x (right) to LIDAR -y;
    the vertical camera axis is dropped.
    """
    return transform_point(mount, (centroid_c[2], -centroid_c[0]))


def _push_out(centroid: tuple[float, float], offset: float) -> tuple[float, float]:
    r = math.hypot(centroid[0], centroid[1])
    if offset == 0.0 or r < 1e-9:
        return centroid
    f = (r + offset) / r
    return (centroid[0] * f, centroid[1] * f)


def _nearest_within(
    clusters: list[Cluster], point: tuple[float, float], gate: float, offset: float
) -> tuple[Cluster | None, tuple[float, float] | None]:
    best = None
    best_centroid = None
    best_d = gate
    for cl in clusters:
        c = _push_out(cl.centroid, offset)
        d = math.hypot(c[0] - point[0], c[1] - point[1])
        if d <= best_d:
            best = cl
            best_centroid = c
            best_d = d
    return best, best_centroid


def fuse_step(
    clusters: list[Cluster],
    camera_point: tuple[float, float] | None,
    state: FusionState,
    robot_motion: Pose2D,
    config: FusionConfig,
) -> FuseResult:
    """One spatio-temporal correspondence step in the current robot frame.

    The stored prior (expressed in the previous frame) is projected through
    the robot motion; each sensor then matches iff its point falls within the
    gate of that prior.  Both sensors matching fuses to the midpoint, a single
    match passes through, and a both-sensor drought of ``ttl_steps`` ends in
    ``LOST``.  Bootstrap requires ``boot_steps`` consecutive cluster/camera
    agreements ahead of the robot before tracking starts.
    """
    if state.mode is FusionMode.LOST:
        return FuseResult(state, None, None, False)

    if state.mode is FusionMode.BOOTSTRAP:
        if camera_point is not None and clusters:
            cl, c = _nearest_within(
                clusters, camera_point, config.gate, config.centroid_range_offset
            )
            if cl is not None and c[0] > 0.0:
                count = state.boot_count + 1
                mid = (0.5 * (c[0] + camera_point[0]), 0.5 * (c[1] + camera_point[1]))
                if count >= config.boot_steps:
                    new = FusionState(
                        mode=FusionMode.TRACKED_BOTH,
                        leader_local=mid,
                        frames_since_camera=0,
                        frames_since_lidar=0,
                        boot_count=0,
                    )
                    return FuseResult(new, mid, cl, True)
                return FuseResult(replace(state, boot_count=count), None, None, False)
        return FuseResult(replace(state, boot_count=0), None, None, False)

    prior = project_between_frames(state.leader_local, robot_motion)
    cl, c = _nearest_within(clusters, prior, config.gate, config.centroid_range_offset)
    cam_ok = camera_point is not None and math.hypot(
        camera_point[0] - prior[0], camera_point[1] - prior[1]
    ) <= config.gate

    frames_cam = 0 if cam_ok else state.frames_since_camera + 1
    frames_lid = 0 if cl is not None else state.frames_since_lidar + 1

    if cl is not None and cam_ok:
        meas = (0.5 * (c[0] + camera_point[0]), 0.5 * (c[1] + camera_point[1]))
        mode = FusionMode.TRACKED_BOTH
    elif cl is not None:
        meas = c
        mode = FusionMode.TRACKED_LIDAR_ONLY
    elif cam_ok:
        meas = camera_point
        mode = FusionMode.TRACKED_CAMERA_ONLY
    else:
        if min(frames_cam, frames_lid) >= config.ttl_steps:
            lost = FusionState(
                mode=FusionMode.LOST,
                leader_local=None,
                frames_since_camera=frames_cam,
                frames_since_lidar=frames_lid,
            )
            return FuseResult(lost, None, None, False)
        coast = FusionState(
            mode=state.mode,
            leader_local=prior,
            frames_since_camera=frames_cam,
            frames_since_lidar=frames_lid,
        )
        return FuseResult(coast, None, None, False)

    new = FusionState(
        mode=mode,
        leader_local=meas,
        frames_since_camera=frames_cam,
        frames_since_lidar=frames_lid,
    )
    return FuseResult(new, meas, cl, cam_ok)
