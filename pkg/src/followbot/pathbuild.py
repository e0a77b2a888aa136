"""Turning tracked leader positions into a drivable path.

Pipeline per new estimate: admission against a spacing threshold, locally
weighted linear smoothing (tricube weights over the span-nearest neighbours,
fitted against the cumulative chord-length coordinate), uniform arc-length
resampling, and a G2 clothoid spline over the waypoints.

The incremental :class:`PathBuilder` re-smooths only a trailing window of the
dataset and refits only the spline tail whose waypoints changed; everything
before that stays frozen so already-driven path history never moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clothoid import (
    ClothoidSpline,
    FitError,
    SplineBuildError,
    fit_heading_chain,
    _arc_tangent,
    _bisector_heading,
)
from .geometry import normalize_angle

__all__ = [
    "PathConfig",
    "PathDataset",
    "admit_point",
    "loess_smooth",
    "resample_uniform",
    "PathBuilder",
]


@dataclass(frozen=True)
class PathConfig:
    epsilon_d: float = 0.05      # admission spacing threshold, meters
    span: float = 0.3            # LOESS span fraction
    spacing: float = 0.5         # waypoint arc-length spacing, meters
    window: int = 20             # trailing points re-smoothed per admit
    context: int = 10            # frozen points included as regression context


@dataclass
class PathDataset:
    """Ordered admitted leader positions with their timestamps."""

    points: list[tuple[float, float]] = field(default_factory=list)
    times: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)


def admit_point(
    dataset: PathDataset,
    candidate: tuple[float, float],
    epsilon_d: float,
    timestamp: float = 0.0,
) -> bool:
    """Append ``candidate`` when it clears the spacing threshold.

    True and stored iff the dataset is empty or the candidate lies strictly
    more than ``epsilon_d`` from the last admitted point; keeps the dataset
    from growing while the leader stands still.
    """
    if dataset.points:
        last = dataset.points[-1]
        if math.hypot(candidate[0] - last[0], candidate[1] - last[1]) <= epsilon_d:
            return False
    dataset.points.append((float(candidate[0]), float(candidate[1])))
    dataset.times.append(float(timestamp))
    return True


def loess_smooth(points, span: float = 0.3, degree: int = 1) -> np.ndarray:
    """Locally weighted linear smoothing of a 2D point sequence.

    Both coordinates are regressed independently against the cumulative
    chord-length coordinate.  For each point, the ``ceil(span * n)`` nearest
    neighbours (by that coordinate) receive tricube weights
    ``(1 - (d / d_max)^3)^3`` and a weighted degree-1 fit is evaluated at the
    point itself.  Fewer than three points pass through unchanged.
    """
    if degree != 1:
        raise ValueError("only locally linear (degree 1) smoothing is supported")
    if not 0.0 < span <= 1.0:
        raise ValueError("span must lie in (0, 1]")
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 3:
        return pts.copy()
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    t = np.concatenate([[0.0], np.cumsum(seg)])
    q = max(2, min(n, int(math.ceil(span * n))))
    out = np.empty_like(pts)
    for i in range(n):
        d = np.abs(t - t[i])
        scale = np.partition(d, q - 1)[q - 1]
        if scale <= 0.0:
            scale = 1e-12
        u = np.clip(d / scale, 0.0, 1.0)
        w = (1.0 - u ** 3) ** 3
        tc = t - t[i]
        sw = w.sum()
        st = float(w @ tc)
        stt = float(w @ (tc * tc))
        det = sw * stt - st * st
        for c in range(2):
            sx = float(w @ pts[:, c])
            stx = float(w @ (tc * pts[:, c]))
            if det <= 1e-14 * max(sw * stt, st * st, 1e-300):
                out[i, c] = sx / sw
            else:
                out[i, c] = (stt * sx - st * stx) / det
    return out


def resample_uniform(points, spacing: float) -> np.ndarray:
    """Walk the polyline and emit points every ``spacing`` meters of arc length.

    Output starts at the first point, steps at exact multiples of ``spacing``,
    and always includes the final endpoint (which closes the last, generally
    shorter, gap).  A zero-length polyline collapses to a single point.
    """
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        raise ValueError("empty polyline")
    keep = np.concatenate([[True], np.hypot(*np.diff(pts, axis=0).T) > 1e-12])
    pts = pts[keep]
    if len(pts) < 2:
        return pts[:1].copy()
    seg = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    k_max = int(math.floor(total / spacing - 1e-12))
    targets = np.arange(k_max + 1) * spacing
    idx = np.minimum(np.searchsorted(cum, targets, side="right") - 1, len(seg) - 1)
    frac = (targets - cum[idx]) / seg[idx]
    way = pts[idx] + frac[:, None] * (pts[idx + 1] - pts[idx])
    if total - targets[-1] > 1e-9:
        way = np.vstack([way, pts[-1]])
    else:
        way[-1] = pts[-1]
    return way


class PathBuilder:
    """Incremental dataset -> smoothed polyline -> waypoints -> G2 spline.

    Publishes immutable spline snapshots; ``spline`` and ``version`` change
    together, and consumers that hold a snapshot never observe a partial
    rebuild.
    """

    def __init__(self, config: PathConfig | None = None):
        self.config = config or PathConfig()
        self.dataset = PathDataset()
        self.smoothed: list[tuple[float, float]] = []
        self.waypoints: np.ndarray | None = None
        self.headings: np.ndarray | None = None
        self.span_fits: list[list] = []
        self.spline: ClothoidSpline | None = None
        self.version = 0
        self.reversal_count = 0

    def offer(self, point, timestamp: float) -> bool:
        """Admit a leader position estimate; rebuild the tail when stored."""
        cfg = self.config
        pts = self.dataset.points
        if len(pts) >= 2:
            a, b = pts[-2], pts[-1]
            if ((b[0] - a[0]) * (point[0] - b[0]) + (b[1] - a[1]) * (point[1] - b[1])) < 0:
                self.reversal_count += 1
        if not admit_point(self.dataset, point, cfg.epsilon_d, timestamp):
            return False
        self._resmooth()
        self._rebuild()
        return True

    def _resmooth(self):
        cfg = self.config
        pts = self.dataset.points
        n = len(pts)
        lo = max(0, n - cfg.window)
        a = max(0, lo - cfg.context)
        block = loess_smooth(np.asarray(pts[a:n]), span=cfg.span)
        del self.smoothed[lo:]
        self.smoothed.extend((float(x), float(y)) for x, y in block[lo - a:])

    def _rebuild(self):
        cfg = self.config
        if len(self.smoothed) < 2:
            return
        wps = resample_uniform(np.asarray(self.smoothed), cfg.spacing)
        if len(wps) >= 3:
            tail_gap = float(np.hypot(*(wps[-1] - wps[-2])))
            if tail_gap < 0.3 * cfg.spacing:
                # A near-duplicate final waypoint makes the last span
                # ill-conditioned; merge it into the endpoint.
                wps = np.vstack([wps[:-2], wps[-1]])
        if len(wps) < 2:
            return
        prev = self.waypoints
        if prev is None:
            b = 0
        else:
            limit = min(len(prev), len(wps))
            same = np.all(np.abs(prev[:limit] - wps[:limit]) <= 1e-12, axis=1)
            b = int(np.argmin(same)) if not same.all() else limit
            if b == len(prev) == len(wps):
                return
        self._refit_tail(wps, min(b, len(wps) - 1))

    def _refit_tail(self, wps: np.ndarray, b: int):
        n = len(wps)
        chords = np.diff(wps, axis=0)
        chord_heads = np.arctan2(chords[:, 1], chords[:, 0])

        def init_heading(j: int) -> float:
            if j == 0:
                if n >= 3:
                    return _arc_tangent(wps[0], wps[1], wps[2])
                return float(chord_heads[0])
            if j == n - 1:
                if n >= 3:
                    return normalize_angle(_arc_tangent(wps[-1], wps[-2], wps[-3]) + math.pi)
                return float(chord_heads[-1])
            return _bisector_heading(wps[j - 1], wps[j], wps[j + 1])

        if b <= 1 or self.headings is None:
            headings = np.array([init_heading(j) for j in range(n)])
            new_heads, span_fits = fit_heading_chain(wps, headings)
            self.span_fits = span_fits
        else:
            boundary = b - 1
            tail_pts = wps[boundary:]
            headings = np.empty(len(tail_pts))
            headings[0] = self.headings[boundary]
            for j in range(1, len(tail_pts)):
                headings[j] = init_heading(boundary + j)
            kappa_in = self.span_fits[boundary - 1][-1].end_kappa if boundary >= 1 else None
            try:
                tail_heads, tail_fits = fit_heading_chain(tail_pts, headings, kappa_in=kappa_in)
            except (FitError, SplineBuildError):
                # Tail continuation infeasible; rebuild the whole chain once.
                headings = np.array([init_heading(j) for j in range(n)])
                new_heads, span_fits = fit_heading_chain(wps, headings)
                self.span_fits = span_fits
                self.waypoints = wps
                self.headings = new_heads
                self.spline = ClothoidSpline(
                    [seg for span in self.span_fits for seg in span]
                )
                self.version += 1
                return
            new_heads = np.concatenate([self.headings[:boundary], tail_heads])
            self.span_fits = self.span_fits[:boundary] + tail_fits

        self.waypoints = wps
        self.headings = new_heads
        segments = [seg for span in self.span_fits for seg in span]
        self.spline = ClothoidSpline(segments)
        self.version += 1
