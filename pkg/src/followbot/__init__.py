"""Deterministic 2D person-following robot simulator and library.

A simulated leader walks a scripted path; synthetic camera and LIDAR sensors
observe the scene; the pipeline recognises and tracks the leader, rebuilds a
continuous-curvature path from the tracked positions, and drives a unicycle
robot along it.
"""

from .geometry import FrameTransform, Pose2D
from .harness import Scenario, compute_metrics, load_scenario, run, write_outputs
from .scenarios import bundled_names, bundled_scenario

__version__ = "0.1.0"

__all__ = [
    "Pose2D",
    "FrameTransform",
    "Scenario",
    "load_scenario",
    "run",
    "compute_metrics",
    "write_outputs",
    "bundled_names",
    "bundled_scenario",
    "__version__",
]
