"""Prescribed mean curvature functions H on R^3."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Constant:
    value: float

    @property
    def sup_bound(self) -> float:
        return abs(self.value)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.full(xi.shape[:-1], float(self.value))

    def gradient(self, xi):
        return np.zeros_like(np.asarray(xi, dtype=float))

    def to_dict(self) -> dict:
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True, eq=False)
class Radial:
    """H(xi) = h(|xi - center|), h piecewise linear through the table.

    Outside the tabulated radii h is continued by its end values.
    """

    radii: np.ndarray
    values: np.ndarray
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or len(r) < 1:
            raise ValueError("radii and values must be matching 1-D tables")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ValueError("radii must be nonnegative and strictly increasing")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def sup_bound(self) -> float:
        return float(np.abs(self.values).max())

    def profile(self, r):
        return np.interp(r, self.radii, self.values)

    def profile_slope(self, r):
        r = np.asarray(r, dtype=float)
        if len(self.radii) < 2:
            return np.zeros_like(r)
        slopes = np.diff(self.values) / np.diff(self.radii)
        k = np.searchsorted(self.radii, r, side="right") - 1
        inside = (k >= 0) & (k < len(slopes))
        return np.where(inside, slopes[np.clip(k, 0, len(slopes) - 1)], 0.0)

    def __call__(self, xi):
        d = np.asarray(xi, dtype=float) - np.asarray(self.center)
        return self.profile(np.linalg.norm(d, axis=-1))

    def gradient(self, xi):
        d = np.asarray(xi, dtype=float) - np.asarray(self.center)
        r = np.linalg.norm(d, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, d / r[..., None], 0.0)
        return self.profile_slope(r)[..., None] * unit

    def to_dict(self) -> dict:
        return {"type": "radial", "radii": self.radii.tolist(),
                "values": self.values.tolist(), "center": list(self.center)}


@dataclass(frozen=True, eq=False)
class Callback:
    """User evaluator with a declared bound on |H|.

    `fn` maps an (..., 3) array to (...). Without `grad`, gradients are
    taken by central differences.
    """

    fn: Callable
    sup_bound: float
    grad: Optional[Callable] = None
    fd_step: float = 1e-6

    def __call__(self, xi):
        return np.asarray(self.fn(np.asarray(xi, dtype=float)), dtype=float)

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(xi), dtype=float)
        out = np.empty_like(xi)
        for k in range(3):
            e = np.zeros(3)
            e[k] = self.fd_step
            out[..., k] = (self.fn(xi + e) - self.fn(xi - e)) / (2 * self.fd_step)
        return out


PrescribedCurvature = Constant | Radial | Callback


def spot_check(H, points) -> float:
    """Largest |H| over `points`; raises if it exceeds the declared bound."""
    vals = np.abs(H(np.asarray(points, dtype=float)))
    peak = float(vals.max()) if vals.size else 0.0
    if peak > H.sup_bound * (1 + 1e-12) + 1e-300:
        raise ValueError(f"|H| = {peak} exceeds declared sup_bound {H.sup_bound}")
    return peak


def curvature_from_dict(d: dict):
    kind = d.get("type")
    if kind == "constant":
        return Constant(float(d["value"]))
    if kind == "radial":
        return Radial(np.asarray(d["radii"], float), np.asarray(d["values"], float),
                      tuple(d.get("center", (0.0, 0.0, 0.0))))
    raise ValueError(f"unknown H type {kind!r}")
