"""Closed boundary contour as a periodic cubic spline over [0, 2pi)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .errors import Degenerate, SelfIntersecting, TooFewPoints

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class JordanCurve:
    control_points: np.ndarray  # (m, 3)
    spline: CubicSpline
    anchor_phases: np.ndarray  # lifted: strictly increasing, spread < 2pi
    anchor_points: np.ndarray  # (3, 3)
    anchor_sample_indices: tuple

    @property
    def n_points(self) -> int:
        return len(self.control_points)

    @property
    def control_phases(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_points) / self.n_points

    def eval(self, phi):
        return self.spline(phi)

    def eval_d1(self, phi):
        return self.spline(phi, 1)

    def eval_d2(self, phi):
        return self.spline(phi, 2)

    def diameter(self) -> float:
        p = self.control_points
        return float(np.max(np.linalg.norm(p[:, None] - p[None], axis=-1)))

    def length(self, n: int = 2048) -> float:
        return float(_arc_lengths(self, TWO_PI * np.arange(n + 1) / n)[-1])

    def to_dict(self) -> dict:
        return {"points": self.control_points.tolist(),
                "anchors": list(self.anchor_sample_indices)}


def curve_from_samples(points, anchors) -> JordanCurve:
    """Periodic cubic spline through `points` at equispaced phases.

    `anchors` are three indices into `points` in cyclic order; their
    phases are lifted so that phi1 < phi2 < phi3 < phi1 + 2pi.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be an (m, 3) array")
    m = len(pts)
    if m < 8:
        raise TooFewPoints(f"need at least 8 points, got {m}")
    anchors = tuple(int(a) for a in anchors)
    if len(anchors) != 3 or len(set(anchors)) != 3:
        raise ValueError("anchors must be three distinct indices")
    if any(a < 0 or a >= m for a in anchors):
        raise ValueError("anchor index out of range")

    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    diam = float(d.max())
    d[np.diag_indices(m)] = np.inf
    if d.min() <= 1e-12 * max(diam, 1e-300):
        raise Degenerate("control points are not distinct")

    phases = TWO_PI * np.arange(m + 1) / m
    spline = CubicSpline(phases, np.vstack([pts, pts[:1]]), bc_type="periodic",
                         axis=0, extrapolate="periodic")

    lifted = [phases[anchors[0]]]
    for a in anchors[1:]:
        p = phases[a]
        while p <= lifted[-1]:
            p += TWO_PI
        lifted.append(p)
    if lifted[2] >= lifted[0] + TWO_PI:
        raise ValueError("anchors are not in cyclic order")

    curve = JordanCurve(
        control_points=pts.copy(),
        spline=spline,
        anchor_phases=np.array(lifted),
        anchor_points=pts[list(anchors)].copy(),
        anchor_sample_indices=anchors,
    )
    _validate(curve, diam)
    return curve


def _validate(curve: JordanCurve, diam: float) -> None:
    n = max(4096, 32 * curve.n_points)
    phi = TWO_PI * np.arange(n) / n
    speed = np.linalg.norm(curve.eval_d1(phi), axis=1)
    if speed.min() <= 1e-8 * diam:
        raise Degenerate(f"|gamma'| drops to {speed.min():.3e}")

    tol = 1e-6 * diam
    p = curve.eval(phi)
    q = np.roll(p, -1, axis=0)
    seg = np.linalg.norm(q - p, axis=1)
    pairs = cKDTree(p).query_pairs(r=2.0 * seg.max() + tol, output_type="ndarray")
    if len(pairs) == 0:
        return
    i, j = pairs[:, 0], pairs[:, 1]
    gap = np.minimum(np.abs(i - j), n - np.abs(i - j))
    keep = gap > 2
    i, j = i[keep], j[keep]
    if len(i) and _segment_distance(p[i], q[i], p[j], q[j]).min() < tol:
        raise SelfIntersecting("sampled curve comes back onto itself")


def _segment_distance(p1, q1, p2, q2):
    """Minimum distance between segments [p1,q1] and [p2,q2], row-wise."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-300, np.clip((b * f - c * e) / denom, 0, 1), 0.0)
        t = (b * s + f) / e
    t_clip = np.clip(t, 0, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(t != t_clip, np.clip((b * t_clip - c) / a, 0, 1), s)
    x1 = p1 + d1 * s[:, None]
    x2 = p2 + d2 * t_clip[:, None]
    return np.linalg.norm(x1 - x2, axis=1)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


def _arc_lengths(curve: JordanCurve, phi: np.ndarray) -> np.ndarray:
    """Cumulative arc length at sorted phases (first entry 0)."""
    a, b = phi[:-1], phi[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    speed = np.linalg.norm(curve.eval_d1(nodes.ravel()), axis=1).reshape(nodes.shape)
    seg = half * (speed @ _GL_W)
    return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass(frozen=True)
class ChordArcReport:
    delta: float
    M: float

    def holds_for(self, curve: JordanCurve, n_samples: int, rtol: float = 1e-2) -> bool:
        """Re-check min(arc) <= M |p - q| for sampled pairs with |p - q| <= delta."""
        chord, arc = _pair_ratios(curve, n_samples)
        sel = chord <= self.delta
        return bool(np.all(arc[sel] <= self.M * chord[sel] * (1 + rtol)))


def _pair_ratios(curve: JordanCurve, n: int):
    phi = TWO_PI * np.arange(n + 1) / n
    s = _arc_lengths(curve, phi)
    total = s[-1]
    p = curve.eval(phi[:-1])
    i, j = np.triu_indices(n, k=1)
    chord = np.linalg.norm(p[i] - p[j], axis=1)
    along = s[j] - s[i]
    arc = np.minimum(along, total - along)
    return chord, arc


def chord_arc(curve: JordanCurve, n_samples: int = 256, delta: float | None = None,
              m_cap: float = 100.0) -> ChordArcReport:
    """Sampled (delta, M) chord-arc constants.

    With `delta` given, M is the largest sampled arc/chord ratio among
    pairs no farther apart than delta. Without it, delta is the largest
    sampled chord for which that ratio still stays below `m_cap`.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be >= 64")
    chord, arc = _pair_ratios(curve, n_samples)
    ratio = np.maximum(arc / chord, 1.0)
    order = np.argsort(chord, kind="stable")
    chord, ratio = chord[order], ratio[order]
    running = np.maximum.accumulate(ratio)
    if delta is None:
        ok = np.flatnonzero(running <= m_cap)
        k = ok[-1] if len(ok) else 0
        return ChordArcReport(delta=float(chord[k]), M=float(running[k]))
    k = np.searchsorted(chord, delta, side="right") - 1
    if k < 0:
        return ChordArcReport(delta=float(delta), M=1.0)
    return ChordArcReport(delta=float(delta), M=float(running[k]))


def circle_curve(m: int = 96, radius: float = 1.0, center=(0.0, 0.0, 0.0),
                 anchors=None) -> JordanCurve:
    """Circle in a horizontal plane sampled at m equispaced phases.

    Default anchors sit at phases 2pi/3, 4pi/3, 2pi so that the identity
    boundary parametrization satisfies the three-point condition.
    """
    t = TWO_PI * np.arange(m) / m
    pts = np.column_stack([radius * np.cos(t), radius * np.sin(t), np.zeros(m)])
    pts += np.asarray(center, dtype=float)
    if anchors is None:
        if m % 3:
            raise ValueError("default anchors need m divisible by 3")
        anchors = (m // 3, 2 * m // 3, 0)
    return curve_from_samples(pts, anchors)


def ellipse_curve(m: int, a: float, b: float, anchors=None) -> JordanCurve:
    t = TWO_PI * np.arange(m) / m
    pts = np.column_stack([a * np.cos(t), b * np.sin(t), np.zeros(m)])
    if anchors is None:
        anchors = (m // 3, 2 * m // 3, 0)
    return curve_from_samples(pts, anchors)
