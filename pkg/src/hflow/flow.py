"""Time-discrete H-surface flow: one constrained minimization per time step.

The state variables are the interior vertex positions and the boundary
phases. Each step minimizes F(u) = D(u) + 2 V_H(u, u0) + |u - z|^2 / 2h
over that set with a preconditioned projected-gradient method and an
Armijo line search; `solve_stationary` drops the proximal term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import energy as E
from .admissibility import (ConditionReport, SurfaceState, anchor_lock, check_conditions,
                            energy_cap, project_monotone, realize, state_from_surface)
from .errors import LineSearchStall, NotAdmissible
from .mesh import DiskMesh, l2_inner, l2_norm
from .obstacle import AllSpace

TRACE_COLUMNS = ("step", "time", "dirichlet", "h_volume", "f_value", "dissipation_increment",
                 "dissipation_total", "dt_norm", "hopf_residual", "neumann_residual",
                 "stationarity_residual", "inner_iters")

LEDGER_TOL = 1e-8


@dataclass
class InnerConfig:
    max_iters: int = 500
    grad_tol: float = 1e-7
    armijo_c: float = 1e-4
    step_shrink: float = 0.5
    init_step: float = 1.0


@dataclass
class ConvergenceConfig:
    dt_tol: float = 1e-4
    hopf_tol: float = 1e-3


@dataclass
class FlowConfig:
    h: float = 0.05
    max_steps: int = 2000
    inner: InnerConfig = field(default_factory=InnerConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    c: float = 1.0 / 3.0
    s: float = math.inf
    cadence: int = 0  # frame output every `cadence` steps, 0 = none
    n_test: int = 48  # boundary test directions for the Neumann residual
    q_s: int = 3
    q_x: int = 2

    def __post_init__(self):
        if isinstance(self.inner, dict):
            self.inner = InnerConfig(**self.inner)
        if isinstance(self.convergence, dict):
            self.convergence = ConvergenceConfig(**self.convergence)
        self.validate()

    def validate(self):
        inner, conv = self.inner, self.convergence
        checks = [
            (self.h > 0, "h", "must be positive"),
            (self.max_steps >= 0, "max_steps", "must be >= 0"),
            (inner.max_iters >= 1, "inner.max_iters", "must be >= 1"),
            (inner.grad_tol > 0, "inner.grad_tol", "must be positive"),
            (0 < inner.armijo_c < 1, "inner.armijo_c", "must lie in (0,1)"),
            (0 < inner.step_shrink < 1, "inner.step_shrink", "must lie in (0,1)"),
            (inner.init_step > 0, "inner.init_step", "must be positive"),
            (conv.dt_tol > 0, "convergence.dt_tol", "must be positive"),
            (conv.hopf_tol > 0, "convergence.hopf_tol", "must be positive"),
            (0 < self.c < 1, "c", "must lie in (0,1)"),
            (self.s > 0, "s", "must be positive"),
            (self.cadence >= 0, "cadence", "must be >= 0"),
            (self.n_test >= 1, "n_test", "must be >= 1"),
        ]
        for ok, key, reason in checks:
            if not ok:
                raise ValueError(f"{key}: {reason}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["s"]):
            d["s"] = "inf"
        return d


@dataclass
class StepRecord:
    step: int
    time: float
    dirichlet: float
    h_volume: float
    f_value: float
    dissipation_increment: float
    dissipation_total: float
    dt_norm: float
    hopf_residual: float
    neumann_residual: float
    stationarity_residual: float
    inner_iters: int
    grad_norm: float = 0.0
    stalled: bool = False

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass
class FlowTrace:
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def last(self) -> StepRecord:
        return self.records[-1]


@dataclass
class FlowResult:
    trace: FlowTrace
    state: SurfaceState
    surface: np.ndarray
    report: ConditionReport | None
    converged: bool
    stop_reason: str
    f: np.ndarray | None = None  # backward difference of the last step

    def __iter__(self):  # (trace, state) unpacking
        return iter((self.trace, self.state))


@dataclass
class SolveInfo:
    value: float
    iters: int
    grad_norm: float
    converged: bool
    stalled: bool


# ------------------------------------------------------------ inner solver

class _Problem:
    """The energy as a function of (interior positions, boundary phases)."""

    def __init__(self, mesh: DiskMesh, curve, A, H, u0, z, h, q_s=3, q_x=2):
        self.mesh, self.curve, self.H = mesh, curve, H
        self.A = AllSpace() if A is None else A
        self.u0 = np.asarray(u0, dtype=float)
        self.z = None if z is None else np.asarray(z, dtype=float)
        self.h = h
        self.q = (q_s, q_x)
        self.pos, self.vals = anchor_lock(mesh, curve)
        self.free = np.setdiff1d(np.arange(mesh.n_boundary), self.pos)
        self.m_int = mesh.lumped_mass[mesh.interior]
        self.bw = mesh.boundary_weights()

    def surface(self, state):
        return realize(self.mesh, self.curve, None, state)

    def value(self, u):
        if self.h is None:
            return E.stationary_value(self.mesh, u, self.u0, self.H, *self.q)
        return E.f_value(self.mesh, u, self.u0, self.z, self.h, self.H, *self.q)

    def increment(self, u, du):
        return E.f_increment(self.mesh, u, du, self.u0, self.z, self.h, self.H, *self.q)

    def gradient(self, state, u):
        if self.h is None:
            G = E.stationary_gradient(self.mesh, u, self.u0, self.H, *self.q)
        else:
            G = E.f_gradient(self.mesh, u, self.u0, self.z, self.h, self.H, *self.q)
        g_int = G[self.mesh.interior]
        t = self.curve.eval_d1(state.phases)
        g_phi = np.einsum("ij,ij->i", t, G[self.mesh.boundary_loop])
        g_phi[self.pos] = 0.0
        return g_int, g_phi, t

    def phase_metric(self, t):
        d = self.bw * np.einsum("ij,ij->i", t, t)
        d[self.pos] = 1.0
        return d

    def project(self, interior, phases, metric):
        return SurfaceState(self.A.project(interior),
                            project_monotone(phases, self.pos, self.vals, weights=metric))

    def grad_norm(self, state, g_int, g_phi, metric):
        """Projected-gradient norm in the lumped L2 metric (dual norm when unconstrained)."""
        trial = self.project(state.interior - g_int / self.m_int[:, None],
                             state.phases - g_phi / metric, metric)
        r_int = state.interior - trial.interior
        r_phi = state.phases - trial.phases
        return math.sqrt(math.fsum(self.m_int * np.sum(r_int ** 2, axis=1))
                         + math.fsum(metric * r_phi ** 2))

    def preconditioner(self, t):
        """Factorized J^T (K + mu M) J over interior coordinates and free phases."""
        mesh = self.mesh
        mu = 1.0 / self.h if self.h is not None else 1e-6
        P = (mesh.stiffness + sp.diags(mu * mesh.lumped_mass)).tocsr()
        I, B = mesh.interior, mesh.boundary_loop
        n_i = len(I)
        a11 = sp.kron(P[I][:, I], sp.identity(3), format="csr")
        c = P[I][:, B].tocoo()
        rows = (3 * c.row[:, None] + np.arange(3)).ravel()
        cols = np.repeat(c.col, 3)
        a12 = sp.csr_matrix(((c.data[:, None] * t[c.col]).ravel(), (rows, cols)),
                            shape=(3 * n_i, len(B)))
        c = P[B][:, B].tocoo()
        a22 = sp.csr_matrix((c.data * np.einsum("ij,ij->i", t[c.row], t[c.col]),
                             (c.row, c.col)), shape=(len(B), len(B)))
        a12 = a12[:, self.free]
        a22 = a22[self.free][:, self.free]
        lu = spla.splu(sp.bmat([[a11, a12], [a12.T, a22]], format="csc"))

        def solve(g_int, g_phi):
            x = lu.solve(np.concatenate([g_int.ravel(), g_phi[self.free]]))
            d_phi = np.zeros(mesh.n_boundary)
            d_phi[self.free] = x[3 * n_i:]
            return x[:3 * n_i].reshape(n_i, 3), d_phi

        return solve


def _minimize(prob: _Problem, start: SurfaceState, inner: InnerConfig,
              rebuild_every: int = 20):
    """Projected descent with Armijo backtracking. Returns (state, u, SolveInfo)."""
    x = start.copy()
    u = prob.surface(x)
    F = prob.value(u)
    c, shrink = inner.armijo_c, inner.step_shrink
    g_int, g_phi, t = prob.gradient(x, u)
    metric = prob.phase_metric(t)
    solve = prob.preconditioner(t)
    gnorm = prob.grad_norm(x, g_int, g_phi, metric)
    it = 0
    stalled = False
    while gnorm > inner.grad_tol and it < inner.max_iters:
        if it and it % rebuild_every == 0:
            solve = prob.preconditioner(t)
        d_int, d_phi = solve(g_int, g_phi)
        directions = [(-d_int, -d_phi), (-g_int / prob.m_int[:, None], -g_phi / metric)]
        accepted = None
        for dx_int, dx_phi in directions:
            alpha = inner.init_step
            while alpha > 1e-14:
                trial = prob.project(x.interior + alpha * dx_int, x.phases + alpha * dx_phi,
                                     metric)
                slope = (np.sum(g_int * (trial.interior - x.interior))
                         + np.dot(g_phi, trial.phases - x.phases))
                if slope < 0:
                    u_trial = prob.surface(trial)
                    dF = prob.increment(u, u_trial - u)
                    if dF <= c * slope:
                        accepted = (trial, u_trial, dF)
                        break
                alpha *= shrink
            if accepted is not None:
                break
        if accepted is None:
            stalled = True
            break
        x, u, dF = accepted
        F += dF
        it += 1
        g_int, g_phi, t = prob.gradient(x, u)
        metric = prob.phase_metric(t)
        gnorm = prob.grad_norm(x, g_int, g_phi, metric)
    F = prob.value(u)
    return x, u, SolveInfo(F, it, gnorm, gnorm <= inner.grad_tol, stalled)


# ------------------------------------------------------------ drivers

def rothe_step(mesh: DiskMesh, curve, A, H, u0, prev: SurfaceState, cfg: FlowConfig,
               raise_on_stall: bool = False):
    """One minimizing-movement step from `prev`; returns (state, SolveInfo).

    `u0` is the full vertex array of the initial surface (the H-volume
    reference). On a line-search stall the best iterate found (at worst
    `prev` itself) is returned with `stalled=True`.
    """
    z = realize(mesh, curve, A, prev)
    prob = _Problem(mesh, curve, A, H, u0, z, cfg.h, cfg.q_s, cfg.q_x)
    state, _, info = _minimize(prob, prev, cfg.inner)
    if info.stalled and raise_on_stall:
        raise LineSearchStall(f"no Armijo decrease after {info.iters} iterations "
                              f"(gradient norm {info.grad_norm:.3e})")
    return state, info


def solve_stationary(mesh: DiskMesh, curve, A, H, u0: SurfaceState, cfg: FlowConfig,
                     return_info: bool = False):
    """Minimize D + 2 V_H(., u0) directly, starting from u0."""
    ref = realize(mesh, curve, A, u0)
    prob = _Problem(mesh, curve, A, H, ref, None, None, cfg.q_s, cfg.q_x)
    inner = InnerConfig(**{**asdict(cfg.inner), "max_iters": max(cfg.inner.max_iters, 2000)})
    state, _, info = _minimize(prob, u0, inner)
    return (state, info) if return_info else state


def run_flow(mesh: DiskMesh, curve, A, H, u0: SurfaceState, cfg: FlowConfig,
             override: bool = False, on_step=None) -> FlowResult:
    """Iterate `rothe_step` until convergence or `cfg.max_steps`.

    Converged means the discrete time derivative and the Hopf residual
    are both below their tolerances. `on_step(record, state, u)` is called
    after every accepted step and once for the initial surface (step 0).
    """
    A = AllSpace() if A is None else A
    uref = realize(mesh, curve, A, u0)
    D0 = E.dirichlet(mesh, uref)
    report = check_conditions(H, A, curve, D0, cfg.c, cfg.s)
    if not report.admissible and not override:
        failed = [k for k, v in report.conditions.items() if not v["pass"]]
        raise NotAdmissible("data fail the sufficient conditions: " + ", ".join(failed))

    family = default_field_family(mesh)
    cap = energy_cap(cfg.c, cfg.s, D0)
    trace = FlowTrace()
    zero = np.zeros_like(uref)
    trace.records.append(StepRecord(
        step=0, time=0.0, dirichlet=D0, h_volume=0.0, f_value=D0,
        dissipation_increment=0.0, dissipation_total=0.0, dt_norm=0.0,
        hopf_residual=E.hopf_residual(mesh, uref),
        neumann_residual=neumann_residual(mesh, curve, A, H, u0, zero, cfg.n_test),
        stationarity_residual=stationarity_residual(mesh, uref, zero, family),
        inner_iters=0))
    if on_step is not None:
        on_step(trace.records[0], u0, uref)

    state, u_prev = u0.copy(), uref
    f = zero
    total = 0.0
    converged = False
    reason = "max_steps"
    for j in range(1, cfg.max_steps + 1):
        old_value = E.dirichlet(mesh, u_prev) + 2.0 * E.h_volume(mesh, u_prev, uref, H,
                                                                  cfg.q_s, cfg.q_x)
        state, info = rothe_step(mesh, curve, A, H, uref, state, cfg)
        u = realize(mesh, curve, A, state)
        diff = u - u_prev
        f = diff / cfg.h
        inc = l2_inner(mesh, diff, diff) / (2.0 * cfg.h)
        total += inc
        D = E.dirichlet(mesh, u)
        rec = StepRecord(
            step=j, time=j * cfg.h, dirichlet=D,
            h_volume=E.h_volume(mesh, u, uref, H, cfg.q_s, cfg.q_x),
            f_value=info.value, dissipation_increment=inc, dissipation_total=total,
            dt_norm=l2_norm(mesh, f), hopf_residual=E.hopf_residual(mesh, u),
            neumann_residual=neumann_residual(mesh, curve, A, H, state, f, cfg.n_test),
            stationarity_residual=stationarity_residual(mesh, u, f, family),
            inner_iters=info.iters, grad_norm=info.grad_norm, stalled=info.stalled)
        trace.records.append(rec)
        _check_invariants(trace, rec, D0, cap, old_value)
        if on_step is not None:
            on_step(rec, state, u)
        u_prev = u
        if (rec.dt_norm <= cfg.convergence.dt_tol
                and rec.hopf_residual <= cfg.convergence.hopf_tol):
            converged, reason = True, "converged"
            break
    return FlowResult(trace, state, u_prev, report, converged, reason, f)


def _check_invariants(trace: FlowTrace, rec: StepRecord, D0: float, cap: float,
                      old_value: float):
    msgs = []
    if rec.dissipation_total > 2.0 * D0 + LEDGER_TOL:
        msgs.append(f"step {rec.step}: dissipation {rec.dissipation_total:.6e} exceeds 2 D(u0)")
    if rec.dirichlet > cap + LEDGER_TOL:
        msgs.append(f"step {rec.step}: D = {rec.dirichlet:.6e} above the energy cap {cap:.6e}")
    if rec.f_value > old_value + LEDGER_TOL:
        msgs.append(f"step {rec.step}: F increased over the previous state")
    if rec.stalled:
        msgs.append(f"step {rec.step}: line search stalled at gradient norm {rec.grad_norm:.3e}")
    for m in msgs:
        warnings.warn(m, RuntimeWarning, stacklevel=3)
    trace.warnings.extend(msgs)


# ------------------------------------------------------------ residuals

def _as_state(mesh, curve, u):
    if isinstance(u, SurfaceState):
        return u
    return state_from_surface(mesh, curve, u)


def neumann_residual(mesh: DiskMesh, curve, A, H, u, f, n_test: int | None = None) -> float:
    """Largest normalized violation of the boundary variational inequality.

    `u` is a SurfaceState or a realized surface (phases are then recovered
    by nearest-point projection). Test directions w = gamma'(phi)(psi - phi)
    vanish in the interior; psi is phi pushed forward or backward on a
    three-vertex arc and projected back onto the monotone, anchored set.
    The residual is max(0, -<dF, w>) / |w|_{L2(boundary)} over all tests.
    """
    state = _as_state(mesh, curve, u)
    uu = realize(mesh, curve, None, state)
    f = np.asarray(f, dtype=float)
    g = E.dirichlet_gradient(mesh, uu) + mesh.lumped_mass[:, None] * f + E.cross_load(mesh, uu, H)
    phi = state.phases
    t = curve.eval_d1(phi)
    g_phi = np.einsum("ij,ij->i", t, g[mesh.boundary_loop])
    pos, vals = anchor_lock(mesh, curve)
    free = np.setdiff1d(np.arange(mesh.n_boundary), pos)
    if n_test is not None and n_test < len(free):
        free = free[np.linspace(0, len(free) - 1, n_test).round().astype(int)]
    n = mesh.n_boundary
    bw = mesh.boundary_weights() * np.einsum("ij,ij->i", t, t)
    eps = 1e-3 * (2.0 * math.pi / n)
    worst = 0.0
    for i in free:
        bump = np.zeros(n)
        bump[[(i - 1) % n, i, (i + 1) % n]] = (0.5, 1.0, 0.5)
        for sign in (1.0, -1.0):
            dphi = project_monotone(phi + sign * eps * bump, pos, vals) - phi
            norm = math.sqrt(math.fsum(bw * dphi ** 2))
            if norm == 0.0:
                continue
            worst = max(worst, -float(np.dot(g_phi, dphi)) / norm)
    return worst


def interior_bump_fields(mesh: DiskMesh, spacing: float = 0.4, radius: float = 0.35):
    """Compactly supported bumps e_k (1 - |x - c|^2 / r^2)^2_+ on a square lattice."""
    ticks = np.arange(-1.0, 1.0 + 1e-9, spacing)
    ticks = ticks - ticks.mean()
    out = []
    x = mesh.vertices
    for cx in ticks:
        for cy in ticks:
            if math.hypot(cx, cy) + radius >= 1.0 - 1e-9:
                continue
            r2 = np.sum((x - (cx, cy)) ** 2, axis=1) / radius ** 2
            prof = np.clip(1.0 - r2, 0.0, None) ** 2
            for k in range(2):
                eta = np.zeros((mesh.n_vertices, 2))
                eta[:, k] = prof
                out.append(eta)
    return out


def tangential_fields(mesh: DiskMesh, max_order: int = 3):
    """p(x, y) (-y, x) with p = Im(z^3) Re(z^k) or Im(z^3) Im(z^k).

    Tangential on the unit circle and zero at the cube roots of unity,
    hence at all three anchors.
    """
    zz = mesh.vertices[:, 0] + 1j * mesh.vertices[:, 1]
    base = np.imag(zz ** 3)
    rot = np.column_stack([-mesh.vertices[:, 1], mesh.vertices[:, 0]])
    out = []
    for k in range(max_order + 1):
        parts = [np.real(zz ** k)] + ([np.imag(zz ** k)] if k else [])
        for p in parts:
            out.append((base * p)[:, None] * rot)
    return out


def default_field_family(mesh: DiskMesh):
    return interior_bump_fields(mesh) + tangential_fields(mesh)


def w1inf_norm(mesh: DiskMesh, eta) -> float:
    eta = np.asarray(eta, dtype=float)
    d = mesh.gradients(eta)
    return float(np.max(np.linalg.norm(eta, axis=1)) + np.max(np.sqrt(np.sum(d ** 2, axis=(1, 2)))))


def stationarity_residual(mesh: DiskMesh, u, f, field_family=None) -> float:
    """max over the family of |inner variation| / (1 + |eta|_{W1,inf})."""
    family = default_field_family(mesh) if field_family is None else field_family
    worst = 0.0
    for eta in family:
        r = E.inner_variation_residual(mesh, u, f, eta)
        worst = max(worst, abs(r) / (1.0 + w1inf_norm(mesh, eta)))
    return worst


def euler_lagrange_residual(mesh: DiskMesh, u, f, H) -> float:
    """Dual lumped-L2 norm of K u + M f + cross load at interior vertices."""
    u = np.asarray(u, dtype=float)
    g = E.dirichlet_gradient(mesh, u) + mesh.lumped_mass[:, None] * np.asarray(f, float) \
        + E.cross_load(mesh, u, H)
    I = mesh.interior
    return math.sqrt(math.fsum(np.sum(g[I] ** 2, axis=1) / mesh.lumped_mass[I]))


def cotan_mean_curvature(mesh: DiskMesh, u, voronoi: bool = False) -> np.ndarray:
    """Signed mean curvature at each vertex from the cotangent formula.

    H_i = (L u)_i . n_i / (2 A_i) with L the cotangent Laplacian of the
    surface itself, n_i the area-weighted vertex normal oriented like
    D1u x D2u and A_i the barycentric (or mixed Voronoi) area.
    Values at boundary vertices are meaningless and returned as nan.
    """
    u = np.asarray(u, dtype=float)
    tri = mesh.triangles
    p = u[tri]  # (T, 3, 3)
    lap = np.zeros_like(u)
    area_v = np.zeros(len(u))
    normal = np.zeros_like(u)
    cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    tri_area = 0.5 * np.linalg.norm(cross, axis=1)
    np.add.at(normal, tri.ravel(), np.repeat(cross, 3, axis=0))
    cots = np.zeros((len(tri), 3))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        e1 = p[:, b] - p[:, a]
        e2 = p[:, c] - p[:, a]
        cots[:, a] = np.einsum("ij,ij->i", e1, e2) / np.linalg.norm(np.cross(e1, e2), axis=1)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        w = 0.5 * cots[:, a]  # the angle at a faces edge (b, c)
        d = (p[:, c] - p[:, b]) * w[:, None]
        np.add.at(lap, tri[:, b], d)
        np.add.at(lap, tri[:, c], -d)
    if voronoi:
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            lb = np.sum((p[:, c] - p[:, a]) ** 2, axis=1)
            lc = np.sum((p[:, b] - p[:, a]) ** 2, axis=1)
            vor = (lb * cots[:, b] + lc * cots[:, c]) / 8.0
            obtuse = cots < 0
            share = np.where(obtuse.any(axis=1),
                             np.where(obtuse[:, a], tri_area / 2.0, tri_area / 4.0), vor)
            np.add.at(area_v, tri[:, a], share)
    else:
        np.add.at(area_v, tri.ravel(), np.repeat(tri_area / 3.0, 3))
    n = normal / np.linalg.norm(normal, axis=1, keepdims=True)
    out = np.einsum("ij,ij->i", lap, n) / (2.0 * area_v)
    out[mesh.boundary_loop] = np.nan
    return out


def surface_distance(mesh: DiskMesh, u, v) -> float:
    return l2_norm(mesh, np.asarray(u, float) - np.asarray(v, float))


__all__ = [
    "TRACE_COLUMNS", "InnerConfig", "ConvergenceConfig", "FlowConfig", "StepRecord",
    "FlowTrace", "FlowResult", "SolveInfo", "rothe_step", "run_flow", "solve_stationary",
    "neumann_residual", "stationarity_residual", "default_field_family",
    "interior_bump_fields", "tangential_fields", "w1inf_norm", "euler_lagrange_residual",
    "cotan_mean_curvature", "surface_distance",
]
