"""Concentric-ring triangulation of the closed unit disk and P1 calculus on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import MeshError

ANCHOR_ANGLES = (2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0, 0.0)


def ring_counts(n_boundary: int, n_rings: int) -> list[int]:
    """Vertex count of ring r = 1..n_rings (innermost first).

    ceil(n_boundary * r / n_rings), rounded to a multiple of 3 with ties
    going up, never fewer than 3.
    """
    counts = []
    for r in range(1, n_rings + 1):
        raw = -(-n_boundary * r // n_rings)
        n3 = 3 * math.floor(raw / 3 + 0.5)
        counts.append(max(3, n3))
    return counts


@dataclass(frozen=True, eq=False)
class DiskMesh:
    vertices: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    boundary_loop: np.ndarray  # (n_b,), counterclockwise from angle 0
    boundary_angles: np.ndarray  # (n_b,)
    anchor_indices: np.ndarray  # (3,), boundary vertices at 2pi/3, 4pi/3, 0
    n_rings: int
    areas: np.ndarray = field(init=False, repr=False)
    basis_gradients: np.ndarray = field(init=False, repr=False)  # (T, 3, 2)
    lumped_mass: np.ndarray = field(init=False, repr=False)
    stiffness: sp.csr_matrix = field(init=False, repr=False)
    interior: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = self.vertices
        tri = self.triangles
        e1 = v[tri[:, 1]] - v[tri[:, 0]]
        e2 = v[tri[:, 2]] - v[tri[:, 0]]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise MeshError("triangle with non-positive signed area")
        areas = 0.5 * det
        # rows of the inverse Jacobian are grad(lambda_1), grad(lambda_2)
        g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
        g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
        g0 = -g1 - g2
        grads = np.stack([g0, g1, g2], axis=1)

        n = len(v)
        mass = np.zeros(n)
        np.add.at(mass, tri.ravel(), np.repeat(areas / 3.0, 3))

        local = np.einsum("tak,tbk->tab", grads, grads) * areas[:, None, None]
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        K = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))

        on_boundary = np.zeros(n, dtype=bool)
        on_boundary[self.boundary_loop] = True

        for name, val in [
            ("areas", areas),
            ("basis_gradients", grads),
            ("lumped_mass", mass),
            ("stiffness", K),
            ("interior", np.flatnonzero(~on_boundary)),
        ]:
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)
        for arr in (self.vertices, self.triangles, self.boundary_loop,
                    self.boundary_angles, self.anchor_indices):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_loop)

    @property
    def area(self) -> float:
        return float(math.fsum(self.areas))

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def boundary_weights(self) -> np.ndarray:
        """Arc-length weight of each boundary vertex (half its two edges)."""
        p = self.vertices[self.boundary_loop]
        seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        return 0.5 * (seg + np.roll(seg, 1))

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """Per-triangle (D1u, D2u), shape (T, 2, d)."""
        u = np.asarray(u, dtype=float)
        tri = self.triangles
        # differences against the first vertex: constants give exactly zero
        diff = u[tri[:, 1:]] - u[tri[:, :1]]
        return np.einsum("tak,tai->tki", self.basis_gradients[:, 1:], diff)

    def interpolate(self, fn) -> np.ndarray:
        """Nodal values fn(x, y) at every vertex."""
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return np.asarray(fn(x, y), dtype=float)

    def embed(self) -> np.ndarray:
        """The flat disk (x, y, 0) at every vertex."""
        return np.column_stack([self.vertices, np.zeros(self.n_vertices)])


def build_disk_mesh(n_boundary: int, n_rings: int) -> DiskMesh:
    if n_boundary < 6 or n_boundary % 3:
        raise MeshError("n_boundary must be >= 6 and divisible by 3")
    if n_rings < 1:
        raise MeshError("n_rings must be >= 1")

    counts = ring_counts(n_boundary, n_rings)
    counts[-1] = n_boundary

    # vertex order: boundary ring first, then inward, center last
    ring_start = {}
    verts = []
    ring_angles = {}
    for r in range(n_rings, 0, -1):
        c = counts[r - 1]
        ang = 2.0 * math.pi * np.arange(c) / c
        if r == n_rings:
            for k, a in enumerate(ANCHOR_ANGLES):
                ang[(k + 1) % 3 * c // 3] = a
        rad = r / n_rings
        ring_start[r] = len(verts)
        ring_angles[r] = ang
        verts.extend(zip(rad * np.cos(ang), rad * np.sin(ang)))
    center = len(verts)
    verts.append((0.0, 0.0))
    vertices = np.array(verts, dtype=float)
    b = np.arange(n_boundary)
    vertices[b] = np.column_stack([np.cos(ring_angles[n_rings]), np.sin(ring_angles[n_rings])])

    tris = []
    c1 = counts[0]
    s1 = ring_start[1]
    for k in range(c1):
        tris.append((center, s1 + k, s1 + (k + 1) % c1))
    for r in range(1, n_rings):
        tris.extend(_zip_rings(ring_start[r], counts[r - 1], ring_start[r + 1], counts[r]))

    anchors = np.array([n_boundary // 3, 2 * n_boundary // 3, 0])
    return DiskMesh(
        vertices=vertices,
        triangles=np.array(tris, dtype=np.int64),
        boundary_loop=b,
        boundary_angles=ring_angles[n_rings].copy(),
        anchor_indices=anchors,
        n_rings=n_rings,
    )


def _zip_rings(s_in, n_in, s_out, n_out):
    # advance along whichever ring's next vertex comes first in angle
    tris = []
    i = j = 0
    while i < n_in or j < n_out:
        a_in = (i + 1) / n_in
        a_out = (j + 1) / n_out
        vi, vo = s_in + i % n_in, s_out + j % n_out
        if j < n_out and (i >= n_in or a_out <= a_in):
            tris.append((vi, vo, s_out + (j + 1) % n_out))
            j += 1
        else:
            tris.append((vi, vo, s_in + (i + 1) % n_in))
            i += 1
    return tris


def p1_gradient(mesh: DiskMesh, u, t: int):
    """(D1u, D2u) on triangle t for per-vertex values u."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != mesh.n_vertices:
        raise ValueError("u must have one value per vertex")
    g = mesh.basis_gradients[t, 1:]
    vals = u[mesh.triangles[t]]
    diff = vals[1:] - vals[:1]
    return g[:, 0] @ diff, g[:, 1] @ diff


def l2_inner(mesh: DiskMesh, u, v) -> float:
    """Lumped-mass inner product sum_i m_i u_i . v_i."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape[0] != mesh.n_vertices:
        raise ValueError(f"size mismatch: {u.shape} vs {v.shape}")
    prod = u * v if u.ndim == 1 else np.sum(u * v, axis=1)
    return float(math.fsum(mesh.lumped_mass * prod))


def l2_norm(mesh: DiskMesh, u) -> float:
    return math.sqrt(max(l2_inner(mesh, u, u), 0.0))
