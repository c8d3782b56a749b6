"""Convex constraint sets: the whole space or a closed ball."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoBoundary, NotOnBoundary


@dataclass(frozen=True)
class AllSpace:
    def project(self, p):
        return np.array(p, dtype=float)

    def contains(self, p, tol: float = 0.0):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool) if p.ndim > 1 else True

    def min_principal_curvature(self, a):
        raise NoBoundary("the whole space has no boundary")

    @property
    def volume(self) -> float:
        return math.inf

    def to_dict(self) -> dict:
        return {"type": "all"}


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius ** 3

    def project(self, p):
        p = np.asarray(p, dtype=float)
        c = np.asarray(self.center)
        d = p - c
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        outside = r > self.radius
        return np.where(outside, c + d * (self.radius / np.where(outside, r, 1.0)), p)

    def contains(self, p, tol: float = 1e-12):
        p = np.asarray(p, dtype=float)
        r = np.linalg.norm(p - np.asarray(self.center), axis=-1)
        return r <= self.radius * (1.0 + tol)

    def min_principal_curvature(self, a, tol: float = 1e-9):
        r = float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(self.center)))
        if abs(r - self.radius) > tol:
            raise NotOnBoundary(f"|a - center| = {r} differs from R = {self.radius}")
        return 1.0 / self.radius

    def to_dict(self) -> dict:
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


Obstacle = AllSpace | Ball


def project(A, p):
    return A.project(p)


def contains(A, p):
    return A.contains(p)


def min_principal_curvature(A, a):
    return A.min_principal_curvature(a)


def obstacle_from_dict(d: dict):
    kind = d.get("type")
    if kind == "all":
        return AllSpace()
    if kind == "ball":
        return Ball(center=tuple(d.get("center", (0.0, 0.0, 0.0))), radius=float(d["radius"]))
    raise ValueError(f"unknown obstacle type {kind!r}")
