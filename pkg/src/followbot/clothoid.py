"""Clothoid primitives: Fresnel integrals, closed-form evaluation, G1 Hermite
fitting, and G2 spline construction over waypoint sequences.

A clothoid segment has curvature varying linearly with arc length,
``kappa(s) = kappa0 + dkappa * s``.  Positions follow from the Fresnel
integrals ``C(s) = int_0^s cos(pi u^2 / 2) du`` and
``S(s) = int_0^s sin(pi u^2 / 2) du``.

Evaluation switches between the Fresnel closed form and composite
Gauss-Legendre quadrature when ``|dkappa| * s^2`` is small; the closed form
loses digits there to cancellation between nearly equal Fresnel values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .geometry import Pose2D, normalize_angle

__all__ = [
    "fresnel",
    "ClothoidSegment",
    "ClothoidSpline",
    "FitError",
    "SplineBuildError",
    "clothoid_g1_fit",
    "build_g2_spline",
    "eval_spline",
]

# |dkappa| * s^2 below which the closed form is replaced by quadrature.
_FRESNEL_SWITCH = 1e-4
# |dkappa| * s^2 below which dkappa is dropped entirely (arc / line).
_NEGLIGIBLE_SPIRAL = 1e-15

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def fresnel(s):
    """Fresnel integrals ``(C(s), S(s))``; accepts scalars or arrays."""
    ss, cc = special.fresnel(s)
    return cc, ss


def _position_fresnel(x0, y0, theta0, kappa0, gamma, s):
    root = math.sqrt(math.pi * abs(gamma))
    c0, s0 = fresnel(kappa0 / root)
    c1, s1 = fresnel((kappa0 + gamma * s) / root)
    sign = 1.0 if gamma > 0 else -1.0
    dc = sign * (c1 - c0)
    ds = s1 - s0
    scale = math.sqrt(math.pi / abs(gamma))
    phase = theta0 - kappa0 * kappa0 / (2.0 * gamma)
    cp = math.cos(phase)
    sp = math.sin(phase)
    return (x0 + scale * (cp * dc - sp * ds), y0 + scale * (sp * dc + cp * ds))


def _position_quadrature(x0, y0, theta0, kappa0, gamma, s):
    # Panels sized so each spans well under a radian of heading change.
    phase = abs(kappa0 * s) + 0.5 * abs(gamma) * s * s
    panels = max(1, int(math.ceil(phase / 0.4)))
    edges = np.linspace(0.0, s, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    th = theta0 + u * (kappa0 + 0.5 * gamma * u)
    w = half[:, None] * _GL_WEIGHTS[None, :]
    return (x0 + float(np.sum(w * np.cos(th))), y0 + float(np.sum(w * np.sin(th))))


def _position(x0, y0, theta0, kappa0, gamma, s):
    """Point reached after arc length ``s`` from ``(x0, y0, theta0)``."""
    if s == 0.0:
        return (x0, y0)
    spiral = abs(gamma) * s * s
    if spiral > _FRESNEL_SWITCH:
        return _position_fresnel(x0, y0, theta0, kappa0, gamma, s)
    if spiral <= _NEGLIGIBLE_SPIRAL:
        if abs(kappa0 * s) <= 1e-15:
            return (x0 + s * math.cos(theta0), y0 + s * math.sin(theta0))
        th1 = theta0 + kappa0 * s
        return (
            x0 + (math.sin(th1) - math.sin(theta0)) / kappa0,
            y0 - (math.cos(th1) - math.cos(theta0)) / kappa0,
        )
    return _position_quadrature(x0, y0, theta0, kappa0, gamma, s)


@dataclass(frozen=True)
class ClothoidSegment:
    """One clothoid piece: start pose, start curvature, curvature rate, length."""

    x0: float
    y0: float
    theta0: float
    kappa0: float
    dkappa: float
    length: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError("segment length must be positive")

    def point_at(self, s: float) -> tuple[float, float, float, float]:
        """Return ``(x, y, theta, kappa)`` at arc length ``s`` from the start."""
        x, y = _position(self.x0, self.y0, self.theta0, self.kappa0, self.dkappa, s)
        theta = normalize_angle(self.theta0 + s * (self.kappa0 + 0.5 * self.dkappa * s))
        return (x, y, theta, self.kappa0 + self.dkappa * s)

    @property
    def end_kappa(self) -> float:
        return self.kappa0 + self.dkappa * self.length

    def end_pose(self) -> tuple[float, float, float]:
        x, y, th, _ = self.point_at(self.length)
        return (x, y, th)

    def positions(self, s: np.ndarray) -> np.ndarray:
        """Vectorized positions for arc lengths ``s`` (shape (n, 2))."""
        s = np.asarray(s, dtype=float)
        gamma = self.dkappa
        if abs(gamma) * float(np.max(s, initial=0.0)) ** 2 > _FRESNEL_SWITCH:
            root = math.sqrt(math.pi * abs(gamma))
            c0, s0 = fresnel(self.kappa0 / root)
            c1, s1 = fresnel((self.kappa0 + gamma * s) / root)
            sign = 1.0 if gamma > 0 else -1.0
            dc = sign * (c1 - c0)
            ds = s1 - s0
            scale = math.sqrt(math.pi / abs(gamma))
            phase = self.theta0 - self.kappa0 ** 2 / (2.0 * gamma)
            cp, sp = math.cos(phase), math.sin(phase)
            return np.stack(
                [self.x0 + scale * (cp * dc - sp * ds), self.y0 + scale * (sp * dc + cp * ds)],
                axis=-1,
            )
        out = np.empty(s.shape + (2,))
        flat = s.reshape(-1)
        res = out.reshape(-1, 2)
        for i, si in enumerate(flat):
            res[i] = _position(self.x0, self.y0, self.theta0, self.kappa0, gamma, float(si))
        return out

    def to_dict(self) -> dict:
        return {
            "x0": self.x0,
            "y0": self.y0,
            "theta0": self.theta0,
            "kappa0": self.kappa0,
            "dkappa": self.dkappa,
            "L": self.length,
        }

    @staticmethod
    def from_dict(d: dict) -> "ClothoidSegment":
        return ClothoidSegment(d["x0"], d["y0"], d["theta0"], d["kappa0"], d["dkappa"], d["L"])


class ClothoidSpline:
    """Chain of clothoid segments addressed by cumulative arc length."""

    def __init__(self, segments: list[ClothoidSegment]):
        if not segments:
            raise ValueError("spline needs at least one segment")
        self.segments = list(segments)
        lengths = [seg.length for seg in self.segments]
        self.cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        self.total_length = float(self.cumulative[-1])

    def eval(self, s: float) -> tuple[Pose2D, float, bool]:
        """Pose and curvature at arc length ``s``; flags out-of-range clamping."""
        clamped = False
        if s < 0.0:
            s, clamped = 0.0, True
        elif s > self.total_length:
            s, clamped = self.total_length, True
        idx = int(np.searchsorted(self.cumulative, s, side="right")) - 1
        idx = min(max(idx, 0), len(self.segments) - 1)
        x, y, th, kappa = self.segments[idx].point_at(s - float(self.cumulative[idx]))
        return (Pose2D(x, y, th), kappa, clamped)

    def sample(self, step: float) -> tuple[np.ndarray, np.ndarray]:
        """Arc lengths at ``step`` spacing (end included) and their positions."""
        n = max(1, int(math.ceil(self.total_length / step)))
        s = np.linspace(0.0, self.total_length, n + 1)
        pts = np.empty((len(s), 2))
        for i, seg in enumerate(self.segments):
            lo, hi = self.cumulative[i], self.cumulative[i + 1]
            mask = (s >= lo) & (s <= hi) if i == len(self.segments) - 1 else (s >= lo) & (s < hi)
            if np.any(mask):
                pts[mask] = seg.positions(s[mask] - lo)
        return s, pts

    def to_dicts(self) -> list[dict]:
        return [seg.to_dict() for seg in self.segments]

    @staticmethod
    def from_dicts(dicts: list[dict]) -> "ClothoidSpline":
        return ClothoidSpline([ClothoidSegment.from_dict(d) for d in dicts])


def eval_spline(spline: ClothoidSpline, s: float) -> tuple[Pose2D, float, bool]:
    """Pose and curvature at arc length ``s``; out-of-range values clamp."""
    return spline.eval(s)


class FitError(Exception):
    """G1 fit did not converge; carries the best residual reached."""

    def __init__(self, residual: float):
        super().__init__(f"clothoid fit residual {residual:.3e}")
        self.residual = residual


class SplineBuildError(Exception):
    """G2 relaxation left a joint curvature mismatch above tolerance."""

    def __init__(self, mismatch: float):
        super().__init__(f"joint curvature mismatch {mismatch:.3e}")
        self.mismatch = mismatch


def clothoid_g1_fit(
    p0: tuple[float, float],
    theta0: float,
    p1: tuple[float, float],
    theta1: float,
    tol: float = 1e-11,
    max_iter: int = 100,
) -> ClothoidSegment:
    """Fit one clothoid from ``(p0, theta0)`` to ``(p1, theta1)``.

    Works on the chord-normalized problem and solves the two-parameter root
    system in (start curvature, length) with a damped Newton iteration; the
    curvature rate is eliminated through the end-heading condition.  Straight
    and circular-arc limit cases are returned exactly.
    """
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    chord = math.hypot(dx, dy)
    if chord < 1e-12:
        raise ValueError("endpoints coincide")
    psi = math.atan2(dy, dx)
    phi0 = normalize_angle(theta0 - psi)
    phi1 = normalize_angle(theta1 - psi)
    theta0 = normalize_angle(theta0)

    if abs(phi0) < 1e-12 and abs(phi1) < 1e-12:
        return ClothoidSegment(p0[0], p0[1], theta0, 0.0, 0.0, chord)
    if abs(phi0 + phi1) < 1e-12 and abs(phi1) < 3.0:
        kappa = 2.0 * math.sin(phi1) / chord
        length = chord * phi1 / math.sin(phi1)
        return ClothoidSegment(p0[0], p0[1], theta0, kappa, 0.0, length)

    delta = phi1 - phi0

    def residual(k0: float, length: float) -> tuple[float, float]:
        dk = 2.0 * (delta - k0 * length) / (length * length)
        x, y = _position(0.0, 0.0, phi0, k0, dk, length)
        return (x - 1.0, y)

    def norm2(r):
        return r[0] * r[0] + r[1] * r[1]

    half = 0.5 * delta
    l_arc = half / math.sin(half) if abs(half) > 1e-9 and abs(math.sin(half)) > 1e-6 else 1.0
    l_arc = min(max(l_arc, 0.5), 20.0)
    starts = [
        (-(4.0 * phi0 + 2.0 * phi1), l_arc),
        (0.0, 1.0 + 0.25 * (phi0 * phi0 + phi1 * phi1)),
        (-(2.0 * phi0 + phi1), 2.0 * l_arc),
    ]

    best_norm = math.inf
    for k0, length in starts:
        r = residual(k0, length)
        rn = norm2(r)
        if not math.isfinite(rn):
            continue
        converged = False
        for _ in range(max_iter):
            if rn <= tol * tol:
                converged = True
                break
            hk = 1e-6 * max(1.0, abs(k0))
            hl = 1e-6 * max(1.0, length)
            rk_p = residual(k0 + hk, length)
            rk_m = residual(k0 - hk, length)
            rl_p = residual(k0, min(length + hl, 50.0))
            rl_m = residual(k0, max(length - hl, 1e-3))
            j00 = (rk_p[0] - rk_m[0]) / (2.0 * hk)
            j10 = (rk_p[1] - rk_m[1]) / (2.0 * hk)
            j01 = (rl_p[0] - rl_m[0]) / (2.0 * hl)
            j11 = (rl_p[1] - rl_m[1]) / (2.0 * hl)
            det = j00 * j11 - j01 * j10
            if not math.isfinite(det) or abs(det) < 1e-14:
                break
            step_k = (r[0] * j11 - r[1] * j01) / det
            step_l = (j00 * r[1] - j10 * r[0]) / det
            alpha = 1.0
            improved = False
            while alpha >= 1e-4:
                k0_t = k0 - alpha * step_k
                l_t = min(max(length - alpha * step_l, 0.05), 50.0)
                r_t = residual(k0_t, l_t)
                rn_t = norm2(r_t)
                if math.isfinite(rn_t) and rn_t < rn:
                    k0, length, r, rn = k0_t, l_t, r_t, rn_t
                    improved = True
                    break
                alpha *= 0.5
            if not improved:
                break
        if rn <= tol * tol:
            converged = True
        if converged:
            dk = 2.0 * (delta - k0 * length) / (length * length)
            return ClothoidSegment(
                p0[0], p0[1], theta0, k0 / chord, dk / (chord * chord), length * chord
            )
        best_norm = min(best_norm, math.sqrt(rn))
    raise FitError(best_norm * chord)


def clothoid_pair_fit(
    p0: tuple[float, float],
    theta0: float,
    kappa0: float,
    p1: tuple[float, float],
    theta1: float,
    tol: float = 1e-11,
    max_iter: int = 100,
) -> list[ClothoidSegment]:
    """Reach ``(p1, theta1)`` from a fully prescribed start state.

    A single clothoid cannot in general hit an end position and heading when
    its start curvature is also prescribed, so this fits two equal-length
    pieces (curvature-continuous at the junction); the second curvature rate
    follows from the end-heading condition and a damped Newton solves for the
    first rate and the piece length.
    """
    g1 = clothoid_g1_fit(p0, theta0, p1, theta1, tol=tol, max_iter=max_iter)
    if abs(g1.kappa0 - kappa0) <= 1e-9:
        return [g1]
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    chord = math.hypot(dx, dy)
    psi = math.atan2(dy, dx)
    phi0 = normalize_angle(theta0 - psi)
    phi1 = normalize_angle(theta1 - psi)
    delta = phi1 - phi0
    k0 = kappa0 * chord

    def residual(dk1: float, length: float) -> tuple[float, float]:
        k_mid = k0 + dk1 * length
        dk2 = 2.0 * (delta - 2.0 * k0 * length - 1.5 * dk1 * length * length) / (
            length * length
        )
        mx, my = _position(0.0, 0.0, phi0, k0, dk1, length)
        theta_mid = phi0 + k0 * length + 0.5 * dk1 * length * length
        ex, ey = _position(mx, my, theta_mid, k_mid, dk2, length)
        return (ex - 1.0, ey)

    length = max(g1.length / chord * 0.5, 0.05)
    k_target = g1.kappa0 * chord + g1.dkappa * chord * chord * (0.5 * g1.length / chord)
    dk1 = (k_target - k0) / length
    r = residual(dk1, length)
    rn = r[0] * r[0] + r[1] * r[1]
    for _ in range(max_iter):
        if rn <= tol * tol:
            break
        hk = 1e-6 * max(1.0, abs(dk1))
        hl = 1e-6 * max(1.0, length)
        rk_p = residual(dk1 + hk, length)
        rk_m = residual(dk1 - hk, length)
        rl_p = residual(dk1, min(length + hl, 25.0))
        rl_m = residual(dk1, max(length - hl, 1e-3))
        j00 = (rk_p[0] - rk_m[0]) / (2.0 * hk)
        j10 = (rk_p[1] - rk_m[1]) / (2.0 * hk)
        j01 = (rl_p[0] - rl_m[0]) / (2.0 * hl)
        j11 = (rl_p[1] - rl_m[1]) / (2.0 * hl)
        det = j00 * j11 - j01 * j10
        if not math.isfinite(det) or abs(det) < 1e-14:
            break
        step_k = (r[0] * j11 - r[1] * j01) / det
        step_l = (j00 * r[1] - j10 * r[0]) / det
        alpha = 1.0
        improved = False
        while alpha >= 1e-4:
            dk1_t = dk1 - alpha * step_k
            l_t = min(max(length - alpha * step_l, 0.02), 25.0)
            r_t = residual(dk1_t, l_t)
            rn_t = r_t[0] * r_t[0] + r_t[1] * r_t[1]
            if math.isfinite(rn_t) and rn_t < rn:
                dk1, length, r, rn = dk1_t, l_t, r_t, rn_t
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    if rn > tol * tol:
        raise FitError(math.sqrt(rn) * chord)
    k_mid = k0 + dk1 * length
    dk2 = 2.0 * (delta - 2.0 * k0 * length - 1.5 * dk1 * length * length) / (
        length * length
    )
    first = ClothoidSegment(
        p0[0], p0[1], normalize_angle(theta0), kappa0,
        dk1 / (chord * chord), length * chord,
    )
    mx, my, mtheta = first.end_pose()
    second = ClothoidSegment(
        mx, my, mtheta, k_mid / chord, dk2 / (chord * chord), length * chord
    )
    return [first, second]


def _fit_span(p0, theta0, p1, theta1, kappa_in=None, depth: int = 0) -> list[ClothoidSegment]:
    """Span fit with a chord-splitting fallback for hard heading combinations."""
    try:
        if kappa_in is None:
            return [clothoid_g1_fit(p0, theta0, p1, theta1)]
        return clothoid_pair_fit(p0, theta0, kappa_in, p1, theta1)
    except FitError:
        if depth >= 3:
            raise
        mid = (0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1]))
        theta_m = math.atan2(p1[1] - p0[1], p1[0] - p0[0])
        return _fit_span(p0, theta0, mid, theta_m, kappa_in, depth + 1) + _fit_span(
            mid, theta_m, p1, theta1, None, depth + 1
        )


def _chord_headings(pts: np.ndarray) -> np.ndarray:
    d = np.diff(pts, axis=0)
    return np.arctan2(d[:, 1], d[:, 0])


def _bisector_heading(p_prev, p, p_next) -> float:
    u1 = np.asarray(p) - np.asarray(p_prev)
    u2 = np.asarray(p_next) - np.asarray(p)
    n1 = np.hypot(*u1)
    n2 = np.hypot(*u2)
    if n1 < 1e-12 or n2 < 1e-12:
        v = u1 if n1 >= n2 else u2
        return math.atan2(v[1], v[0])
    v = u1 / n1 + u2 / n2
    if np.hypot(*v) < 1e-9:
        # Near-reversal: fall back to the direction across the triple.
        v = np.asarray(p_next) - np.asarray(p_prev)
        if np.hypot(*v) < 1e-12:
            v = u2 / n2
    return math.atan2(v[1], v[0])


def _arc_tangent(p0, p1, p2) -> float:
    """Tangent at ``p0`` of the circle through three points (chord if collinear)."""
    ax, ay = p0
    bx, by = p1
    cx, cy = p2
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    chord = math.atan2(by - ay, bx - ax)
    if abs(d) < 1e-12:
        return chord
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    # Radial direction at p0; tangent is its perpendicular, oriented with travel.
    rx, ry = ax - ux, ay - uy
    t1 = math.atan2(rx, -ry)
    t2 = math.atan2(-rx, ry)
    if abs(normalize_angle(t1 - chord)) <= abs(normalize_angle(t2 - chord)):
        return t1
    return t2


class _Chain:
    """Span fits for a waypoint / heading chain with lazy refitting.

    With ``kappa_in`` set, the first span starts at that prescribed curvature
    (two-piece fit); all other spans are plain G1 fits from the headings.
    """

    def __init__(self, pts: np.ndarray, headings: np.ndarray, kappa_in: float | None = None):
        self.pts = pts
        self.headings = headings
        self.kappa_in = kappa_in
        self._fits: list[list[ClothoidSegment] | None] = [None] * (len(pts) - 1)

    def span(self, i: int) -> list[ClothoidSegment]:
        if self._fits[i] is None:
            self._fits[i] = _fit_span(
                tuple(self.pts[i]), float(self.headings[i]),
                tuple(self.pts[i + 1]), float(self.headings[i + 1]),
                kappa_in=self.kappa_in if i == 0 else None,
            )
        return self._fits[i]

    def set_heading(self, v: int, theta: float):
        self.headings[v] = theta
        if v > 0:
            self._fits[v - 1] = None
        if v < len(self._fits):
            self._fits[v] = None

    def kappa_start(self, i: int) -> float:
        return self.span(i)[0].kappa0

    def kappa_end(self, i: int) -> float:
        return self.span(i)[-1].end_kappa

    def span_fits(self) -> list[list[ClothoidSegment]]:
        return [self.span(i) for i in range(len(self._fits))]


def fit_heading_chain(
    pts: np.ndarray,
    headings: np.ndarray,
    kappa_in: float | None = None,
    tol: float = 1e-6,
    max_sweeps: int = 50,
) -> tuple[np.ndarray, list[list[ClothoidSegment]]]:
    """Relax chain headings until joint curvatures are continuous.

    The first and last headings stay fixed and only interior headings move.
    With ``kappa_in`` given, the first span additionally starts at that
    prescribed curvature (continuity with an already-built prefix), realized
    inside the span fit itself.  Iterative refinement: damped Newton on the
    joint-mismatch system, capped at ``max_sweeps`` iterations; raises
    :class:`SplineBuildError` when a mismatch above ``tol`` remains.

    Returns the relaxed headings and one fitted segment list per span.
    """
    n = len(pts)
    chain = _Chain(
        np.asarray(pts, dtype=float),
        np.asarray(headings, dtype=float).copy(),
        kappa_in=float(kappa_in) if kappa_in is not None else None,
    )
    free = list(range(1, n - 1))
    joints = list(range(1, n - 1))

    def residuals() -> np.ndarray:
        return np.asarray(
            [chain.kappa_start(j) - chain.kappa_end(j - 1) for j in joints]
        )

    if not joints:
        return chain.headings, chain.span_fits()

    r = residuals()
    target = min(tol * 1e-2, 1e-8)
    for _ in range(max_sweeps):
        worst = float(np.max(np.abs(r)))
        if worst <= target:
            break
        jac = np.zeros((len(r), len(free)))
        h = 1e-7
        for vi, v in enumerate(free):
            theta = float(chain.headings[v])
            chain.set_heading(v, theta + h)
            jac[:, vi] = (residuals() - r) / h
            chain.set_heading(v, theta)
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        base = chain.headings[np.asarray(free)].copy()
        alpha = 1.0
        improved = False
        while alpha >= 1e-3:
            for vi, v in enumerate(free):
                chain.set_heading(v, float(base[vi] - alpha * step[vi]))
            r_t = residuals()
            if np.all(np.isfinite(r_t)) and float(np.max(np.abs(r_t))) < max(
                worst * (1.0 - 1e-4 * alpha), target * 0.5
            ):
                r = r_t
                improved = True
                break
            alpha *= 0.5
        if not improved:
            for vi, v in enumerate(free):
                chain.set_heading(v, float(base[vi]))
            r = residuals()
            break
    worst = float(np.max(np.abs(residuals())))
    if worst > tol:
        raise SplineBuildError(worst)
    return chain.headings, chain.span_fits()


def build_g2_spline(waypoints, tol: float = 1e-6, max_sweeps: int = 50) -> ClothoidSpline:
    """Connect waypoints with a curvature-continuous clothoid spline.

    End headings come from circle fits through the first and last waypoint
    triples; interior headings start at chord bisectors and are relaxed until
    joint curvature mismatches drop below ``tol``.
    """
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two 2D waypoints")
    if np.any(np.hypot(*np.diff(pts, axis=0).T) < 1e-9):
        raise ValueError("consecutive waypoints coincide")

    n = len(pts)
    chords = _chord_headings(pts)
    headings = np.empty(n)
    if n == 2:
        headings[:] = chords[0]
    else:
        headings[0] = _arc_tangent(pts[0], pts[1], pts[2])
        headings[-1] = normalize_angle(
            _arc_tangent(pts[-1], pts[-2], pts[-3]) + math.pi
        )
        for j in range(1, n - 1):
            headings[j] = _bisector_heading(pts[j - 1], pts[j], pts[j + 1])
    _, span_fits = fit_heading_chain(pts, headings, kappa_in=None, tol=tol, max_sweeps=max_sweeps)
    return ClothoidSpline([seg for span in span_fits for seg in span])
