"""The constraint class: monotone boundary phases, anchor lock, obstacle,
energy cap, and the sufficient conditions on H that make a run admissible."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import isotonic_regression

from .curvature import Callback, Constant, Radial
from .errors import InfeasibleAnchors, ObstacleViolation, UnsupportedCombination
from .mesh import DiskMesh
from .obstacle import AllSpace, Ball

TWO_PI = 2.0 * math.pi


@dataclass
class SurfaceState:
    interior: np.ndarray  # (n_interior, 3), ordered as mesh.interior
    phases: np.ndarray  # (n_boundary,), ordered as mesh.boundary_loop

    def copy(self) -> "SurfaceState":
        return SurfaceState(self.interior.copy(), self.phases.copy())


def anchor_lock(mesh: DiskMesh, curve):
    """Boundary-loop positions of the anchors and their locked phases.

    The anchor at angle 0 is the one at Theta_3 = 2pi, so its phase is
    the lifted third anchor phase minus 2pi.
    """
    pos = np.asarray(mesh.anchor_indices)
    vals = np.array(curve.anchor_phases, dtype=float)
    vals = np.where(mesh.boundary_angles[pos] == 0.0, vals - TWO_PI, vals)
    return pos, vals


def project_monotone(phases, anchor_positions, anchor_values, weights=None) -> np.ndarray:
    """Weighted L2-nearest cyclically nondecreasing phases with anchors locked.

    Between consecutive anchors the free values are fitted by isotonic
    regression and then clamped into [left anchor, right anchor].
    """
    phi = np.array(phases, dtype=float)
    n = len(phi)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    pos = np.asarray(anchor_positions, dtype=int)
    vals = np.asarray(anchor_values, dtype=float)
    order = np.argsort(pos)
    pos, vals = pos[order], vals[order]
    if np.any(np.diff(vals) <= 0) or vals[-1] >= vals[0] + TWO_PI:
        raise InfeasibleAnchors("anchor phases are not cyclically increasing")
    out = phi.copy()
    out[pos] = vals
    k = len(pos)
    for a in range(k):
        left, right = pos[a], pos[(a + 1) % k] + (n if a == k - 1 else 0)
        lo, hi = vals[a], vals[(a + 1) % k] + (TWO_PI if a == k - 1 else 0.0)
        j = np.arange(left + 1, right)
        if len(j) == 0:
            continue
        idx = j % n
        shift = np.where(j >= n, TWO_PI, 0.0)
        y = phi[idx] + shift
        fit = isotonic_regression(y, weights=w[idx], increasing=True).x
        out[idx] = np.clip(fit, lo, hi) - shift
    return out


def is_monotone(mesh: DiskMesh, curve, phases, tol: float = 0.0) -> bool:
    phi = np.asarray(phases, dtype=float)
    ext = np.append(phi, phi[0] + TWO_PI)
    pos, vals = anchor_lock(mesh, curve)
    return bool(np.all(np.diff(ext) >= -tol) and np.all(phi[pos] == vals))


def realize(mesh: DiskMesh, curve, A, state: SurfaceState) -> np.ndarray:
    """Full vertex field: boundary vertex i at gamma(phi_i), interior copied."""
    pos, vals = anchor_lock(mesh, curve)
    if not np.array_equal(np.asarray(state.phases)[pos], vals):
        raise InfeasibleAnchors("anchor phases differ from their locked values")
    u = np.empty((mesh.n_vertices, 3))
    u[mesh.interior] = state.interior
    ub = curve.eval(state.phases)
    if A is not None and not np.all(A.contains(ub)):
        raise ObstacleViolation("boundary curve leaves the obstacle")
    u[mesh.boundary_loop] = ub
    return u


def initial_phases(mesh: DiskMesh, curve) -> np.ndarray:
    """Piecewise-linear phases in the boundary angle through the anchors."""
    pos, vals = anchor_lock(mesh, curve)
    order = np.argsort(pos)
    ang = np.append(mesh.boundary_angles[pos[order]], mesh.boundary_angles[pos[order][0]] + TWO_PI)
    ph = np.append(vals[order], vals[order][0] + TWO_PI)
    phi = np.interp(mesh.boundary_angles, ang, ph)
    phi[pos] = vals
    return phi


def harmonic_state(mesh: DiskMesh, curve, A=None, phases=None) -> SurfaceState:
    """Discrete harmonic extension of the boundary trace, projected into A."""
    phi = initial_phases(mesh, curve) if phases is None else np.asarray(phases, float)
    ub = curve.eval(phi)
    K = mesh.stiffness.tocsr()
    I, B = mesh.interior, mesh.boundary_loop
    rhs = -(K[I][:, B] @ ub)
    lu = spla.splu(K[I][:, I].tocsc())
    interior = lu.solve(rhs)
    if A is not None:
        interior = A.project(interior)
    return SurfaceState(interior, phi)


def bump(mesh: DiskMesh, state: SurfaceState, height=0.5, center=(0.0, 0.0), radius=0.6,
         direction=(0.0, 0.0, 1.0)) -> SurfaceState:
    """Add height * (1 - |x - c|^2 / r^2)_+^2 along `direction` to the interior."""
    x = mesh.vertices[mesh.interior] - np.asarray(center, dtype=float)
    prof = np.clip(1.0 - np.sum(x * x, axis=1) / radius ** 2, 0.0, None) ** 2
    out = state.copy()
    out.interior = out.interior + height * prof[:, None] * np.asarray(direction, float)
    return out


def state_from_surface(mesh: DiskMesh, curve, u) -> SurfaceState:
    """Recover a state from full vertex positions (boundary phases by nearest point)."""
    u = np.asarray(u, dtype=float)
    ub = u[mesh.boundary_loop]
    n = 16 * max(curve.n_points, mesh.n_boundary)
    grid = TWO_PI * np.arange(n) / n
    pts = curve.eval(grid)
    d = np.linalg.norm(ub[:, None, :] - pts[None], axis=-1)
    phi = grid[np.argmin(d, axis=1)]
    for _ in range(8):  # Newton on (gamma(phi) - p) . gamma'(phi) = 0
        r = curve.eval(phi) - ub
        t = curve.eval_d1(phi)
        g = np.einsum("ij,ij->i", r, t)
        hss = np.einsum("ij,ij->i", t, t) + np.einsum("ij,ij->i", r, curve.eval_d2(phi))
        phi = phi - g / np.where(np.abs(hss) > 1e-300, hss, 1.0)
    # unwrap onto the lifted anchor branch
    pos, vals = anchor_lock(mesh, curve)
    start = vals[np.argmin(pos)]
    phi = start + np.mod(phi - start + 1e-12, TWO_PI) - 1e-12
    phi = np.maximum.accumulate(phi)
    phi[pos] = vals
    return SurfaceState(u[mesh.interior].copy(), phi)


# ------------------------------------------------------------ energy cap

def sigma(c: float, s: float) -> float:
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    return (1.0 + c) / (1.0 - c) if math.isfinite(s) else math.inf


def energy_cap(c: float, s: float, u0_energy: float) -> float:
    """sigma * D(u0) with sigma = (1+c)/(1-c); infinite when s is infinite."""
    sg = sigma(c, s)
    return sg * u0_energy if math.isfinite(sg) else math.inf


# ------------------------------------------------------------ conditions on H

@dataclass
class ConditionReport:
    c: float
    s: float
    sigma: float
    dirichlet_u0: float
    conditions: dict = field(default_factory=dict)
    gamma_inside: bool = True

    @property
    def admissible(self) -> bool:
        cond = self.conditions
        any_h = any(cond[k]["pass"] for k in ("H1", "H2", "H3", "H4"))
        return bool(any_h and cond["rand"]["pass"] and cond["assum_uo"]["pass"]
                    and self.gamma_inside)

    def to_dict(self) -> dict:
        def num(x):
            return x if x is None or math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "c": self.c, "s": num(self.s), "sigma": num(self.sigma),
            "dirichlet_u0": self.dirichlet_u0,
            "gamma_inside": self.gamma_inside,
            "admissible": self.admissible,
            **{k: {kk: (num(vv) if isinstance(vv, float) else vv) for kk, vv in v.items()}
               for k, v in self.conditions.items()},
        }


def _entry(passed, value=None, threshold=None, note=None, supported=True):
    margin = None
    if value is not None and threshold is not None and math.isfinite(threshold) \
            and math.isfinite(value):
        margin = threshold - value
    return {"pass": bool(passed), "value": value, "threshold": threshold,
            "margin": margin, "supported": supported, "note": note}


def _shell_area(r, d, R):
    """Area of the sphere |x - cH| = r inside the ball |x - cA| <= R, |cH - cA| = d."""
    r = np.asarray(r, dtype=float)
    if not math.isfinite(R):
        return 4.0 * math.pi * r ** 2
    full = 4.0 * math.pi * r ** 2
    if d == 0.0:
        return np.where(r <= R, full, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = 2.0 * math.pi * r ** 2 - math.pi * r * (r ** 2 + d ** 2 - R ** 2) / d
    out = np.where(r + d <= R, full, cap)
    out = np.where((r >= d + R) | (r <= d - R), 0.0, out)
    return np.clip(out, 0.0, None)


def _geometry(H: Radial, A):
    if isinstance(A, Ball):
        d = float(np.linalg.norm(np.asarray(H.center) - np.asarray(A.center)))
        return d, A.radius, max(0.0, d - A.radius), d + A.radius
    return 0.0, math.inf, 0.0, math.inf


def _radial_breaks(H: Radial, d, R, lo, hi, levels=()):
    br = {lo}
    if math.isfinite(hi):
        br.add(hi)
    for x in list(H.radii) + ([abs(R - d), d + R] if math.isfinite(R) else []):
        if lo < x < hi:
            br.add(float(x))
    r, v = H.radii, H.values
    for tau in levels:  # crossings of |h| = tau on each linear piece
        for target in (tau, -tau):
            for k in range(len(r) - 1):
                a, b = v[k] - target, v[k + 1] - target
                if a * b < 0:
                    x = r[k] + (r[k + 1] - r[k]) * a / (a - b)
                    if lo < x < hi:
                        br.add(float(x))
    return sorted(br)


_GX, _GW = np.polynomial.legendre.leggauss(6)


def _radial_integral(H: Radial, A, integrand, levels=()):
    """int over A of integrand(|h(r)|) dx for a radial H; integrand vanishes where masked."""
    d, R, lo, hi = _geometry(H, A)
    br = _radial_breaks(H, d, R, lo, hi, levels)
    tail = None
    if not math.isfinite(hi):
        tail = float(abs(H.values[-1]))
        br.append(max(br[-1], float(H.radii[-1])) + 1.0)
    total = 0.0
    for a, b in zip(br[:-1], br[1:]):
        x = 0.5 * (a + b) + 0.5 * (b - a) * _GX
        vals = integrand(np.abs(H.profile(x))) * _shell_area(x, d, R)
        total += 0.5 * (b - a) * float(vals @ _GW)
    if tail is not None and integrand(np.array([tail]))[0] != 0.0:
        return math.inf
    return total


def _sup_abs(H, A) -> float:
    if isinstance(H, Constant):
        return abs(H.value)
    if isinstance(H, Radial):
        d, R, lo, hi = _geometry(H, A)
        pts = [lo] + [float(x) for x in H.radii if lo < x < hi]
        if math.isfinite(hi):
            pts.append(hi)
        else:
            pts.append(float(H.radii[-1]) + 1.0)
        return float(np.abs(H.profile(np.array(pts))).max())
    return float(H.sup_bound)


def check_h1(H, A, dirichlet_u0):
    thr = math.sqrt(2 * math.pi / (3 * dirichlet_u0)) if dirichlet_u0 > 0 else math.inf
    val = _sup_abs(H, A)
    return _entry(val <= thr, val, thr)


def check_h2(H, A):
    if isinstance(H, Callback):
        raise UnsupportedCombination("(H2) needs a Constant or Radial H")
    if not isinstance(A, Ball):
        return _entry(False, None, None, note="obstacle is not bounded")
    R = float(np.linalg.norm(A.center)) + A.radius  # A inside B_R(0)
    tau0 = 1.5 / R
    thr = 4.5 * math.pi
    if isinstance(H, Constant):
        a = abs(H.value)
        val = a ** 3 * A.volume if a >= tau0 else 0.0
    else:
        val = _radial_integral(H, A, lambda h: np.where(h >= tau0, h ** 3, 0.0), levels=(tau0,))
    return _entry(val < thr, val, thr, note=f"R = {R}")


def level_volume(H, A, tau: float) -> float:
    """Lebesgue measure of {x in A : |H(x)| >= tau}."""
    if isinstance(H, Constant):
        return (A.volume if abs(H.value) >= tau else 0.0) if tau > 0 else A.volume
    if isinstance(H, Radial):
        return _radial_integral(H, A, lambda h: (h >= tau).astype(float), levels=(tau,))
    raise UnsupportedCombination("level sets need a Constant or Radial H")


def check_h4(H, A, n_levels: int = 2000):
    """Certified sup_tau tau^3 |{|H| >= tau}| / (4pi/3), tested against 1.

    The level volume is nonincreasing in tau, so on [t_k, t_k+1] the
    product is bounded by V(t_k) t_k+1^3.
    """
    if isinstance(H, Callback):
        raise UnsupportedCombination("(H4) needs a Constant or Radial H")
    top = _sup_abs(H, A)
    unit = 4.0 * math.pi / 3.0
    if top == 0.0:
        return _entry(True, 0.0, 1.0)
    if isinstance(H, Constant):
        val = A.volume * top ** 3 / unit
        return _entry(val < 1.0, val, 1.0)
    taus = np.geomspace(top * 1e-6, top, n_levels)
    taus = np.unique(np.concatenate([taus, np.abs(H.values[(np.abs(H.values) > taus[0])
                                                            & (np.abs(H.values) <= top)])]))
    vols = np.array([level_volume(H, A, t) for t in taus])
    if not np.all(np.isfinite(vols)):
        return _entry(False, math.inf, 1.0, note="level set has infinite volume")
    bound = max(float(np.max(vols[:-1] * taus[1:] ** 3)), float(vols[-1] * taus[-1] ** 3),
                float(vols[0] * taus[0] ** 3)) / unit
    return _entry(bound < 1.0, bound, 1.0, note="certified upper bound on the minimal c")


def check_h3(H, A):
    vol = A.volume
    thr = 1.5 * (4 * math.pi / (3 * vol)) ** (1 / 3) if math.isfinite(vol) else 0.0
    val = _sup_abs(H, A)
    return _entry(val < thr, val, thr)


def _sphere_points(n):
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    t = math.pi * (1 + 5 ** 0.5) * k
    r = np.sqrt(1 - z * z)
    return np.column_stack([r * np.cos(t), r * np.sin(t), z])


def check_rand(H, A, n_samples: int = 4096):
    if isinstance(A, AllSpace):
        return _entry(True, None, None, note="no boundary")
    thr = 1.0 / A.radius
    if isinstance(H, (Constant, Radial)):
        if isinstance(H, Radial):
            d, R, _, _ = _geometry(H, A)
            lo, hi = abs(d - R), d + R
            pts = [lo, hi] + [float(x) for x in H.radii if lo < x < hi]
            val = float(np.abs(H.profile(np.array(pts))).max())
        else:
            val = abs(H.value)
    else:
        pts = np.asarray(A.center) + A.radius * _sphere_points(n_samples)
        val = float(np.abs(H(pts)).max())
    return _entry(val <= thr * (1 + 1e-12), val, thr)


def check_assum_uo(dirichlet_u0, c, s):
    val = 2.0 * dirichlet_u0
    thr = s * (1 - c)
    return _entry(val <= thr, val, thr)


def check_conditions(H, A, curve, dirichlet_u0: float, c: float, s: float = math.inf) -> ConditionReport:
    """Evaluate (H1)-(H4), the boundary curvature condition and the initial-energy bound."""
    sg = sigma(c, s)
    rep = ConditionReport(c=c, s=s, sigma=sg, dirichlet_u0=float(dirichlet_u0))
    cond = rep.conditions
    cond["H1"] = check_h1(H, A, dirichlet_u0)
    for name, fn in (("H2", check_h2), ("H4", check_h4)):
        try:
            cond[name] = fn(H, A)
        except UnsupportedCombination as exc:
            cond[name] = _entry(False, note=str(exc), supported=False)
    cond["H3"] = check_h3(H, A)
    cond["rand"] = check_rand(H, A)
    cond["assum_uo"] = check_assum_uo(dirichlet_u0, c, s)
    if curve is not None and A is not None:
        phi = TWO_PI * np.arange(4096) / 4096
        rep.gamma_inside = bool(np.all(A.contains(curve.eval(phi))))
    rep.conditions = {k: cond[k] for k in ("H1", "H2", "H3", "H4", "rand", "assum_uo")}
    return rep
