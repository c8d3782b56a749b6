"""Dirichlet energy, H-volume, the time-discrete functional and its first variations.

All surfaces are per-vertex arrays of shape (N, 3) on a DiskMesh. The
H-volume between u and v is evaluated along the straight segment
U(s) = v + s (u - v), which stays inside any convex obstacle.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NonAdmissibleField, OutsideObstacle
from .mesh import DiskMesh, l2_inner

# symmetric triangle rules in barycentric coordinates, weights sum to 1
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3)),
}


def _dunavant4():
    a, b = 0.445948490915965, 0.091576213509771
    pts = [[1 - 2 * a, a, a], [a, 1 - 2 * a, a], [a, a, 1 - 2 * a],
           [1 - 2 * b, b, b], [b, 1 - 2 * b, b], [b, b, 1 - 2 * b]]
    w = [0.223381589678011] * 3 + [0.109951743655322] * 3
    return np.array(pts), np.array(w)


def _dunavant5():
    a, b = 0.470142064105115, 0.101286507323456
    pts = [[1 / 3, 1 / 3, 1 / 3],
           [1 - 2 * a, a, a], [a, 1 - 2 * a, a], [a, a, 1 - 2 * a],
           [1 - 2 * b, b, b], [b, 1 - 2 * b, b], [b, b, 1 - 2 * b]]
    w = [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3
    return np.array(pts), np.array(w)


_TRI_RULES[4] = _dunavant4()
_TRI_RULES[5] = _dunavant5()
_TRI_RULES[3] = _TRI_RULES[4]


def triangle_rule(degree: int):
    """Barycentric points and weights (summing to 1) exact to `degree`."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    return _TRI_RULES[min(degree, 5)]


def segment_rule(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _fsum(values) -> float:
    return math.fsum(np.ravel(values))


# ---------------------------------------------------------------- Dirichlet

def dirichlet(mesh: DiskMesh, u) -> float:
    du = mesh.gradients(u)
    return 0.5 * _fsum(mesh.areas * np.sum(du * du, axis=(1, 2)))


def dirichlet_gradient(mesh: DiskMesh, u) -> np.ndarray:
    return mesh.stiffness @ np.asarray(u, dtype=float)


# ---------------------------------------------------------------- H-volume

def _check_inside(A, *surfaces):
    if A is None:
        return
    for w in surfaces:
        if not np.all(A.contains(w)):
            raise OutsideObstacle("surface vertex outside the obstacle")


def _homotopy_terms(mesh, u, v, q_s, q_x):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    bary, wx = triangle_rule(q_x)
    s_nodes, ws = segment_rule(q_s)
    tri = mesh.triangles
    W = u - v
    Wq = np.einsum("qa,tai->tqi", bary, W[tri])
    Vq = np.einsum("qa,tai->tqi", bary, v[tri])
    du = mesh.gradients(u)
    dv = mesh.gradients(v)
    return bary, wx, s_nodes, ws, Wq, Vq, du, dv


def h_volume(mesh: DiskMesh, u, v, H, q_s: int = 3, q_x: int = 2, A=None) -> float:
    """H-weighted volume swept by the straight homotopy from v to u.

    Exact for constant H once q_s >= 2 (the integrand is quadratic in s
    and affine in x on each triangle).
    """
    _check_inside(A, u, v)
    _, wx, s_nodes, ws, Wq, Vq, du, dv = _homotopy_terms(mesh, u, v, q_s, q_x)
    per_tri = np.zeros(len(mesh.triangles))
    for s, w_s in zip(s_nodes, ws):
        U1 = (1 - s) * dv[:, 0] + s * du[:, 0]
        U2 = (1 - s) * dv[:, 1] + s * du[:, 1]
        C = np.cross(U1, U2)
        Uq = Vq + s * Wq
        J = np.einsum("tqi,ti->tq", Wq, C)
        per_tri += w_s * ((H(Uq) * J) @ wx)
    return _fsum(mesh.areas * per_tri)


def h_volume_gradient(mesh: DiskMesh, u, v, H, q_s: int = 3, q_x: int = 2) -> np.ndarray:
    """Exact derivative of `h_volume(mesh, u, v, H, q_s, q_x)` w.r.t. the vertex values of u."""
    bary, wx, s_nodes, ws, Wq, Vq, du, dv = _homotopy_terms(mesh, u, v, q_s, q_x)
    G = mesh.basis_gradients  # (T, 3, 2)
    local = np.zeros((len(mesh.triangles), 3, 3))
    for s, w_s in zip(s_nodes, ws):
        U1 = (1 - s) * dv[:, 0] + s * du[:, 0]
        U2 = (1 - s) * dv[:, 1] + s * du[:, 1]
        C = np.cross(U1, U2)
        Uq = Vq + s * Wq
        Hq = H(Uq)  # (T, Q)
        J = np.einsum("tqi,ti->tq", Wq, C)
        dHq = H.gradient(Uq)  # (T, Q, 3)
        # d/dW part and d/dU (through H) part, both weighted by bary_a
        point = Hq[..., None] * C[:, None, :] + s * J[..., None] * dHq  # (T, Q, 3)
        local += w_s * np.einsum("q,qa,tqi->tai", wx, bary, point)
        # d/dU1 and d/dU2 parts
        hw = np.einsum("q,tq,tqi->tqi", wx, Hq, Wq).sum(axis=1)  # sum_q w H W
        a1 = np.cross(U2, hw)
        a2 = np.cross(hw, U1)
        local += w_s * s * (G[:, :, 0:1] * a1[:, None, :] + G[:, :, 1:2] * a2[:, None, :])
    local *= mesh.areas[:, None, None]
    out = np.zeros_like(np.asarray(u, dtype=float))
    np.add.at(out, mesh.triangles, local)
    return out


def volume_additivity_check(mesh: DiskMesh, u, u_tilde, v, H, q_s: int = 3, q_x: int = 2,
                            A=None) -> float:
    """|V(u~,u) + V(u,v) - V(u~,v)|."""
    _check_inside(A, u, u_tilde, v)
    a = h_volume(mesh, u_tilde, u, H, q_s, q_x)
    b = h_volume(mesh, u, v, H, q_s, q_x)
    c = h_volume(mesh, u_tilde, v, H, q_s, q_x)
    return abs(a + b - c)


def cross_load(mesh: DiskMesh, u, H) -> np.ndarray:
    """Assembled 2 H(u) D1u x D2u tested against the hat functions.

    H is evaluated once per triangle at the centroid value of u and the
    load is split equally among the three vertices.
    """
    u = np.asarray(u, dtype=float)
    du = mesh.gradients(u)
    centroid = u[mesh.triangles].mean(axis=1)
    vec = (2.0 / 3.0) * (H(centroid) * mesh.areas)[:, None] * np.cross(du[:, 0], du[:, 1])
    out = np.zeros_like(u)
    np.add.at(out, mesh.triangles, np.repeat(vec[:, None, :], 3, axis=1))
    return out


# ---------------------------------------------------------------- functional

def f_value(mesh: DiskMesh, u, u0, z, h: float, H, q_s: int = 3, q_x: int = 2) -> float:
    """D(u) + 2 V_H(u, u0) + (1/2h) |u - z|^2."""
    if not h > 0:
        raise ValueError("time step must be positive")
    diff = np.asarray(u, dtype=float) - np.asarray(z, dtype=float)
    return (dirichlet(mesh, u) + 2.0 * h_volume(mesh, u, u0, H, q_s, q_x)
            + l2_inner(mesh, diff, diff) / (2.0 * h))


def f_gradient(mesh: DiskMesh, u, u0, z, h: float, H, q_s: int = 3, q_x: int = 2) -> np.ndarray:
    """Gradient of `f_value` with respect to the vertex values of u."""
    if not h > 0:
        raise ValueError("time step must be positive")
    u = np.asarray(u, dtype=float)
    prox = mesh.lumped_mass[:, None] * (u - np.asarray(z, dtype=float)) / h
    return (dirichlet_gradient(mesh, u) + prox
            + 2.0 * h_volume_gradient(mesh, u, u0, H, q_s, q_x))


def stationary_value(mesh, u, u0, H, q_s=3, q_x=2) -> float:
    """D(u) + 2 V_H(u, u0): the functional without the proximal term."""
    return dirichlet(mesh, u) + 2.0 * h_volume(mesh, u, u0, H, q_s, q_x)


def stationary_gradient(mesh, u, u0, H, q_s=3, q_x=2) -> np.ndarray:
    return dirichlet_gradient(mesh, u) + 2.0 * h_volume_gradient(mesh, u, u0, H, q_s, q_x)


# ---------------------------------------------------------------- conformality

def hopf(mesh: DiskMesh, u) -> np.ndarray:
    """Per-triangle |D1u|^2 - |D2u|^2 - 2i D1u.D2u."""
    du = mesh.gradients(u)
    a = np.sum(du[:, 0] ** 2, axis=1) - np.sum(du[:, 1] ** 2, axis=1)
    b = np.sum(du[:, 0] * du[:, 1], axis=1)
    return a - 2j * b


def hopf_residual(mesh: DiskMesh, u) -> float:
    """L1 norm of the Hopf differential."""
    return _fsum(mesh.areas * np.abs(hopf(mesh, u)))


def dbar(mesh: DiskMesh, eta) -> np.ndarray:
    """Per-triangle (D1 eta + i D2 eta) / 2 for a planar field eta (N, 2)."""
    d = mesh.gradients(eta)  # (T, 2, 2): d[:, k, c] = D_k eta_c
    re = d[:, 0, 0] - d[:, 1, 1]
    im = d[:, 0, 1] + d[:, 1, 0]
    return 0.5 * (re + 1j * im)


def check_inner_field(mesh: DiskMesh, eta, tol: float = 1e-10) -> None:
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (mesh.n_vertices, 2):
        raise NonAdmissibleField("eta must be an (N, 2) array")
    b = mesh.boundary_loop
    normal = np.einsum("ij,ij->i", eta[b], mesh.vertices[b])
    if np.abs(normal).max() > tol:
        raise NonAdmissibleField("eta is not tangential along the boundary")
    if np.abs(eta[mesh.anchor_indices]).max() > tol:
        raise NonAdmissibleField("eta does not vanish at the anchor points")


def inner_variation_residual(mesh: DiskMesh, u, f, eta, check: bool = True) -> float:
    """int Re(h[u] dbar(eta)) + int (f . Du) eta over the disk."""
    if check:
        check_inner_field(mesh, eta)
    eta = np.asarray(eta, dtype=float)
    h = hopf(mesh, u)
    first = _fsum(mesh.areas * np.real(h * dbar(mesh, eta)))

    f = np.asarray(f, dtype=float)
    du = mesh.gradients(u)  # (T, 2, 3)
    tri = mesh.triangles
    # g[t, a, k] = f_a . D_k u on triangle t ; exact P1 x P1 integration
    g = np.einsum("tai,tki->tak", f[tri], du)
    e = eta[tri]  # (T, 3, 2)
    pair = np.einsum("tak,tak->t", g, e) + np.einsum("tak,tbk->t", g, e)
    second = _fsum(mesh.areas * pair / 12.0)
    return first + second


def f_increment(mesh: DiskMesh, u, delta, u0, z, h, H, q_s: int = 3, q_x: int = 2) -> float:
    """F(u + delta) - F(u), assembled from terms proportional to delta.

    Subtracting two O(1) energies loses everything below ~1e-16 |F|; this
    form keeps the difference accurate when delta is tiny. `h=None` drops
    the proximal term.
    """
    u = np.asarray(u, dtype=float)
    delta = np.asarray(delta, dtype=float)
    du = mesh.gradients(u)
    dd = mesh.gradients(delta)
    out = _fsum(mesh.areas * np.sum(du * dd + 0.5 * dd * dd, axis=(1, 2)))
    if h is not None:
        r = u - np.asarray(z, dtype=float)
        out += _fsum(mesh.lumped_mass * np.sum(2.0 * r * delta + delta * delta, axis=1)) / (2.0 * h)

    bary, wx, s_nodes, ws, Wq, Vq, du, dv = _homotopy_terms(mesh, u, u0, q_s, q_x)
    Dq = np.einsum("qa,tai->tqi", bary, delta[mesh.triangles])
    per_tri = np.zeros(len(mesh.triangles))
    for s, w_s in zip(s_nodes, ws):
        A = (1 - s) * dv[:, 0] + s * du[:, 0]
        B = (1 - s) * dv[:, 1] + s * du[:, 1]
        a, b = s * dd[:, 0], s * dd[:, 1]
        B2 = B + b
        C2 = np.cross(A + a, B2)
        dC = np.cross(A, b) + np.cross(a, B2)
        Uq = Vq + s * Wq
        J = np.einsum("tqi,ti->tq", Wq, np.cross(A, B))
        dJ = np.einsum("tqi,ti->tq", Dq, C2) + np.einsum("tqi,ti->tq", Wq, dC)
        H_new = H(Uq + s * Dq)
        per_tri += w_s * ((H_new * dJ + (H_new - H(Uq)) * J) @ wx)
    out += 2.0 * _fsum(mesh.areas * per_tri)
    return out
