"""Bundled scenario corpus.

Each builder returns a plain scenario dict (the JSON schema of
:func:`followbot.harness.load_scenario`).  Scripts are generated from polyline
walks at constant speed after an initial standing period that covers the
recognition bootstrap window.
"""

from __future__ import annotations

import math

__all__ = ["bundled_names", "bundled_scenario"]

_STAND_UNTIL = 5.5  # leader stands through the 5 s initialisation window


def _walk(points, speed: float, start_time: float = _STAND_UNTIL) -> list[list[float]]:
    """Waypoints (t, x, y): stand at the first point, then walk at ``speed``."""
    out = [[0.0, float(points[0][0]), float(points[0][1])]]
    t = start_time
    if start_time > 0.0:
        out.append([t, float(points[0][0]), float(points[0][1])])
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        t += math.hypot(x1 - x0, y1 - y0) / speed
        out.append([t, float(x1), float(y1)])
    return out


def _s_curve_points(x0: float = 2.0, length_x: float = 13.5, amp: float = 1.3,
                    step: float = 0.25) -> list[tuple[float, float]]:
    n = int(round(length_x / step))
    pts = []
    for i in range(n + 1):
        x = i * step
        pts.append((x0 + x, amp * math.sin(2.0 * math.pi * x / length_x)))
    return pts


def _arc_points(cx, cy, radius, a0, a1, step_deg=10.0):
    n = max(2, int(abs(a1 - a0) / math.radians(step_deg)))
    return [
        (cx + radius * math.cos(a0 + (a1 - a0) * i / n),
         cy + radius * math.sin(a0 + (a1 - a0) * i / n))
        for i in range(n + 1)
    ]


def _base(name: str, duration: float, seed: int) -> dict:
    return {
        "name": name,
        "duration": duration,
        "dt": 0.05,
        "seed": seed,
        "robot_start": [0.0, 0.0, 0.0],
        "agents": [],
        "obstacles": [],
        "modules": {
            # The pixel drift gate is retuned for this camera geometry; the
            # formula is unchanged but the synthetic pin-hole scales differ
            # from any particular physical rig.
            "recognition": {"drift_tuning": 400.0},
            # Follow closely enough that the leader stays inside the short
            # camera depth range while walking at ~0.9 m/s.
            "control": {"v_nominal": 1.2, "follow_distance": 1.2},
        },
    }


def _straight() -> dict:
    sc = _base("straight", 20.0, 11)
    sc["agents"] = [
        {
            "id": "leader",
            "role": "leader",
            "waypoints": _walk([(2.0, 0.0), (11.0, 0.0)], speed=0.9),
        }
    ]
    return sc


def _s_curve() -> dict:
    sc = _base("s_curve", 30.0, 7)
    sc["agents"] = [
        {
            "id": "leader",
            "role": "leader",
            "waypoints": _walk(_s_curve_points(), speed=0.9),
        }
    ]
    return sc


def _corridor_crossing() -> dict:
    sc = _base("corridor_crossing", 24.0, 21)
    sc["agents"] = [
        {
            "id": "leader",
            "role": "leader",
            "waypoints": _walk([(2.0, 0.0), (13.5, 0.0)], speed=0.85),
        },
        {
            # Walks back down the corridor past the leader, then crosses
            # the walked path behind the robot.
            "id": "passer",
            "role": "pedestrian",
            "waypoints": _walk(
                [(15.0, 1.05), (3.0, 1.05), (2.0, 1.6)], speed=1.1, start_time=6.0
            ),
        },
        {
            # Crosses the corridor far ahead of the leader.
            "id": "crosser",
            "role": "pedestrian",
            "waypoints": _walk(
                [(12.5, 1.9), (12.5, -1.9)], speed=1.0, start_time=6.0
            ),
        },
    ]
    sc["obstacles"] = [
        [[-1.0, 2.2], [16.0, 2.2]],
        [[-1.0, -2.2], [16.0, -2.2]],
    ]
    return sc


def _sharp_turn_fov_loss() -> dict:
    turn = _arc_points(7.0, -1.0, 1.0, math.pi / 2.0, 0.0, step_deg=15.0)
    path = [(2.0, 0.0), (4.0, 0.0), (6.0, 0.0)] + turn[1:] + [(8.0, -3.0), (8.0, -6.5)]
    sc = _base("sharp_turn_fov_loss", 26.0, 13)
    sc["agents"] = [
        {
            "id": "leader",
            "role": "leader",
            "waypoints": _walk(path, speed=0.85),
        },
        {
            # Stands past the corner, in view while the leader rounds it.
            "id": "bystander",
            "role": "pedestrian",
            "waypoints": [[0.0, 8.85, 0.6]],
        },
    ]
    return sc


def _obstacle_stop() -> dict:
    sc = _base("obstacle_stop", 22.0, 5)
    # The slower default follow settings let the leader pull ahead, leaving
    # room for the blocker to step onto the walked path between them.
    sc["modules"]["control"] = {}
    sc["agents"] = [
        {
            "id": "leader",
            "role": "leader",
            "waypoints": _walk([(2.0, 0.0), (13.0, 0.0)], speed=0.9),
        },
        {
            # Steps into the path corridor behind the leader and stays.
            "id": "blocker",
            "role": "pedestrian",
            "waypoints": _walk(
                [(6.9, 2.6), (6.9, 0.36)], speed=1.1, start_time=11.2
            ),
        },
    ]
    return sc


_BUILDERS = {
    "straight": _straight,
    "s_curve": _s_curve,
    "corridor_crossing": _corridor_crossing,
    "sharp_turn_fov_loss": _sharp_turn_fov_loss,
    "obstacle_stop": _obstacle_stop,
}


def bundled_names() -> list[str]:
    return sorted(_BUILDERS)


def bundled_scenario(name: str) -> dict:
    """Scenario dict for a bundled name; raises KeyError on unknown names."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown bundled scenario '{name}'")
    return _BUILDERS[name]()
