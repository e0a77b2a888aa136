"""Planar poses and rigid transforms between the frames used in the pipeline.

Frame conventions, shared by every downstream module:

* World frame ``W``: x east, y north, headings measured CCW from +x.
* Robot / LIDAR frame ``L``: x forward, y left, origin at the robot centre.
* Camera frame ``C``: z along the optical axis (forward), x right, y down.

All angles are radians; every operation that returns a pose or an angle
normalizes it to ``(-pi, pi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Pose2D",
    "FrameTransform",
    "normalize_angle",
    "transform_point",
    "project_between_frames",
    "relative_pose",
    "local_to_parent",
    "parent_to_local",
]

_TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    theta = math.fmod(theta, _TWO_PI)
    if theta > math.pi:
        theta -= _TWO_PI
    elif theta <= -math.pi:
        theta += _TWO_PI
    return theta


@dataclass(frozen=True)
class Pose2D:
    """Planar pose (x, y, theta) of a rigid body in some parent frame."""

    x: float
    y: float
    theta: float

    def normalized(self) -> "Pose2D":
        return Pose2D(self.x, self.y, normalize_angle(self.theta))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class FrameTransform:
    """Rigid transform mapping child-frame points into the parent frame."""

    tx: float = 0.0
    ty: float = 0.0
    rotation: float = 0.0

    @staticmethod
    def identity() -> "FrameTransform":
        return FrameTransform(0.0, 0.0, 0.0)

    @staticmethod
    def from_pose(pose: Pose2D) -> "FrameTransform":
        return FrameTransform(pose.x, pose.y, pose.theta)

    def inverse(self) -> "FrameTransform":
        c = math.cos(self.rotation)
        s = math.sin(self.rotation)
        return FrameTransform(
            -(c * self.tx + s * self.ty),
            -(-s * self.tx + c * self.ty),
            normalize_angle(-self.rotation),
        )

    def compose(self, other: "FrameTransform") -> "FrameTransform":
        """Transform equivalent to applying ``other`` first, then ``self``."""
        c = math.cos(self.rotation)
        s = math.sin(self.rotation)
        return FrameTransform(
            self.tx + c * other.tx - s * other.ty,
            self.ty + s * other.tx + c * other.ty,
            normalize_angle(self.rotation + other.rotation),
        )


def transform_point(t: FrameTransform, p: tuple[float, float]) -> tuple[float, float]:
    """Apply ``R(rotation) @ p + translation``."""
    c = math.cos(t.rotation)
    s = math.sin(t.rotation)
    return (t.tx + c * p[0] - s * p[1], t.ty + s * p[0] + c * p[1])


def project_between_frames(p_prev: tuple[float, float], motion: Pose2D) -> tuple[float, float]:
    """Re-express a point of frame ``L_{k-1}`` in the successor frame ``L_k``.

    ``motion`` is the pose of ``L_k`` written in ``L_{k-1}`` (the robot motion
    over one step); the projection applies the inverse rigid transform.
    """
    dx = p_prev[0] - motion.x
    dy = p_prev[1] - motion.y
    c = math.cos(motion.theta)
    s = math.sin(motion.theta)
    return (c * dx + s * dy, -s * dx + c * dy)


def relative_pose(prev: Pose2D, curr: Pose2D) -> Pose2D:
    """Pose of ``curr`` expressed in the frame of ``prev``."""
    dx = curr.x - prev.x
    dy = curr.y - prev.y
    c = math.cos(prev.theta)
    s = math.sin(prev.theta)
    return Pose2D(c * dx + s * dy, -s * dx + c * dy, normalize_angle(curr.theta - prev.theta))


def local_to_parent(pose: Pose2D, p: tuple[float, float]) -> tuple[float, float]:
    """Map a point given in the frame of ``pose`` into the parent frame."""
    return transform_point(FrameTransform.from_pose(pose), p)


def parent_to_local(pose: Pose2D, p: tuple[float, float]) -> tuple[float, float]:
    """Map a parent-frame point into the frame of ``pose``."""
    dx = p[0] - pose.x
    dy = p[1] - pose.y
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return (c * dx + s * dy, -s * dx + c * dy)
