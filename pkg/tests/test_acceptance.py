"""Acceptance criteria, one reported line each.

Every test appends "[PASS]" or "[FAIL]" plus the measured numbers to the
session summary, prints the same line, and then asserts.
"""

import itertools
import math
import time
import warnings

import numpy as np
import pytest

from hflow import energy as E
from hflow.admissibility import (bump, check_conditions, energy_cap, harmonic_state,
                                 project_monotone, realize)
from hflow.curvature import Constant, Radial
from hflow.curve import circle_curve
from hflow.flow import (FlowConfig, cotan_mean_curvature, default_field_family, run_flow,
                        stationarity_residual)
from hflow.mesh import build_disk_mesh, l2_norm
from hflow.obstacle import AllSpace, Ball

from conftest import ACCEPTANCE_LINES
from oracles import brute_force_isotonic

C, S = 1.0 / 3.0, 100.0  # finite s so the energy cap sigma = 2 is in force


def report(n, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def central_difference(fun, u, eps):
    g = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        up, dn = u.copy(), u.copy()
        up[idx] += eps
        dn[idx] -= eps
        g[idx] = (fun(up) - fun(dn)) / (2 * eps)
    return g


# ---------------------------------------------------------------- scenarios

@pytest.fixture(scope="module")
def disk():
    return build_disk_mesh(96, 16), circle_curve(96)


def _start(mesh, curve, A):
    st = bump(mesh, harmonic_state(mesh, curve, A), 0.5)
    st.interior = A.project(st.interior)
    return st


_runs = {}


def minimal_run(disk, h):
    if h not in _runs:
        mesh, curve = disk
        A = AllSpace()
        cfg = FlowConfig(h=h, max_steps=2000, c=C, s=S)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = run_flow(mesh, curve, A, Constant(0.0), _start(mesh, curve, A), cfg)
        _runs[h] = (res, time.perf_counter() - t0)
    return _runs[h]


@pytest.fixture(scope="module")
def cap_run(disk):
    mesh, curve = disk
    A = Ball((0, 0, 0), 4.0)
    cfg = FlowConfig(h=0.05, max_steps=2000, c=C, s=S,
                     convergence={"dt_tol": 1e-4, "hopf_tol": 0.05})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        # (Rand) fails for this ball: |H| = 0.5 exceeds the boundary curvature 1/4
        res = run_flow(mesh, curve, A, Constant(0.5), _start(mesh, curve, A), cfg, override=True)
    return res


# ---------------------------------------------------------------- criteria

def test_criterion_1_minimal_surface(disk):
    res, secs = minimal_run(disk, 0.05)
    last = res.trace.last
    D = last.dirichlet
    ok = (res.converged and last.step <= 2000 and abs(D - math.pi) <= 0.02 * math.pi
          and last.hopf_residual <= 1e-3 * D and secs <= 300)
    report(1, ok, f"converged={res.converged} in {last.step} steps ({secs:.1f} s), "
                  f"D={D:.6f} (rel. dev. {abs(D - math.pi) / math.pi:.2e} from pi, tol 2e-2), "
                  f"hopf={last.hopf_residual:.2e} (tol {1e-3 * D:.2e})")


def test_criterion_2_spherical_cap(disk, cap_run):
    mesh, _ = disk
    u = cap_run.surface
    centre = int(np.argmin(np.linalg.norm(mesh.vertices, axis=1)))
    apex = abs(u[centre, 2] - u[mesh.boundary_loop, 2].mean())
    target = 2 - math.sqrt(3)
    H = cotan_mean_curvature(mesh, u)
    inner = np.linalg.norm(mesh.vertices, axis=1) < 0.5
    dev = np.max(np.abs(np.abs(H[inner]) - 0.5)) / 0.5
    ok = cap_run.converged and abs(apex - target) <= 0.05 * target and dev <= 0.10
    report(2, ok, f"converged={cap_run.converged} in {cap_run.trace.last.step} steps, "
                  f"apex {apex:.5f} vs {target:.5f} (rel. {abs(apex - target) / target:.2e}, "
                  f"tol 5e-2), cotan |H| max rel. dev. {dev:.2e} on {inner.sum()} vertices "
                  f"(tol 1e-1)")


def test_criterion_3_dissipation_ledger(disk, cap_run):
    worst_diss, worst_cap = -np.inf, -np.inf
    for res in (minimal_run(disk, 0.05)[0], cap_run):
        D0 = res.trace.records[0].dirichlet
        cap = energy_cap(C, S, D0)
        worst_diss = max(worst_diss, np.max(res.trace.column("dissipation_total") - 2 * D0))
        worst_cap = max(worst_cap, np.max(res.trace.column("dirichlet") - cap))
    ok = worst_diss <= 1e-8 and worst_cap <= 1e-8
    report(3, ok, f"max(dissipation - 2 D(u0)) = {worst_diss:.3e}, "
                  f"max(D(u_j) - sigma D(u0)) = {worst_cap:.3e} (tol 1e-8, sigma = 2)")


def test_criterion_4_gradient_consistency():
    mesh = build_disk_mesh(6, 1)
    assert mesh.n_vertices == 7
    rng = np.random.default_rng(4)
    radial = Radial(np.array([0.0, 0.5, 1.0, 2.0]), np.array([1.0, 0.4, -0.3, 0.2]))
    errs = {}
    for name, H in (("constant", Constant(0.7)), ("radial", radial)):
        worst = 0.0
        for _ in range(5):
            u, u0, z = rng.normal(scale=0.7, size=(3, 7, 3))
            g = E.f_gradient(mesh, u, u0, z, 0.2, H)
            fd = central_difference(lambda w: E.f_value(mesh, w, u0, z, 0.2, H), u, 1e-6)
            worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
        errs[name] = worst
    ok = errs["constant"] <= 1e-6 and errs["radial"] <= 1e-4
    report(4, ok, f"relative error constant {errs['constant']:.2e} (tol 1e-6), "
                  f"radial {errs['radial']:.2e} (tol 1e-4)")


def test_criterion_5_volume_identities(disk):
    mesh, _ = disk
    rng = np.random.default_rng(5)
    small = build_disk_mesh(24, 3)
    zero_ok, anti, add = True, 0.0, 0.0
    for _ in range(20):
        H = Constant(rng.uniform(-2, 2))
        surfs = []
        for _ in range(3):
            gaps = rng.uniform(0.2, 1.0, small.n_boundary)
            theta = 2 * math.pi * np.cumsum(gaps) / gaps.sum()
            w = rng.uniform(-0.6, 0.6, size=(small.n_vertices, 3))
            w[small.boundary_loop] = np.column_stack([np.cos(theta), np.sin(theta), 0 * theta])
            surfs.append(w)
        u, ut, v = surfs
        zero_ok &= E.h_volume(small, u, u, H) == 0.0
        anti = max(anti, abs(E.h_volume(small, u, v, H) + E.h_volume(small, v, u, H)))
        add = max(add, E.volume_additivity_check(small, u, ut, v, H))
    x, y = mesh.vertices.T
    para = np.column_stack([x, y, 1 - x * x - y * y])
    V = E.h_volume(mesh, para, mesh.embed(), Constant(1.0))
    rel = abs(V - math.pi / 2) / (math.pi / 2)
    ok = zero_ok and anti <= 1e-12 and add <= 1e-12 and rel <= 0.02
    report(5, ok, f"V(u,u)==0 exactly: {zero_ok}; antisymmetry {anti:.1e}, additivity "
                  f"{add:.1e} (tol 1e-12); paraboloid {V:.6f} vs pi/2 (rel. {rel:.2e}, tol 2e-2)")


def test_criterion_6_ball_specialization():
    curve = circle_curve(24, radius=0.5)
    A = Ball((0, 0, 0), 1.0)
    hi = check_conditions(Constant(1.4), A, curve, 1.0, C)
    lo = check_conditions(Constant(0.9), A, curve, 1.0, C)
    h3, rnd = hi.conditions["H3"], hi.conditions["rand"]
    ok = (h3["pass"] and not rnd["pass"] and not hi.admissible
          and lo.conditions["H3"]["pass"] and lo.conditions["rand"]["pass"])
    report(6, ok, f"H=1.4: H3 {h3['pass']} ({h3['value']} < {h3['threshold']}), "
                  f"rand {rnd['pass']}, admissible {hi.admissible}; H=0.9: "
                  f"H3 {lo.conditions['H3']['pass']}, rand {lo.conditions['rand']['pass']}")


def _arc_projection(vals, lo, hi):
    n = len(vals)
    phases = np.array([lo, *vals, hi, hi + 0.5, hi + 1.0])
    out = project_monotone(phases, [0, n + 1, n + 3], [lo, hi, hi + 1.0])
    return out[1:n + 1]


def test_criterion_7_isotonic_oracle():
    lo, hi = 0.0, 1.0
    grid = np.arange(-0.5, 1.5 + 1e-9, 0.25)
    feasible = grid[(grid >= lo) & (grid <= hi)]
    rng = np.random.default_rng(7)
    instances = [list(v) for n in range(1, 5) for v in itertools.product(grid, repeat=n)]
    instances += [list(rng.choice(grid, size=n)) for n in (5, 6) for _ in range(1500)]
    worst, grid_gap, mismatches = 0.0, 0.0, 0
    for vals in instances:
        got = _arc_projection(vals, lo, hi)
        ref = brute_force_isotonic(vals, lo, hi)
        worst = max(worst, float(np.max(np.abs(got - ref))))
        # no feasible vector on the 0.25 grid does better; equal when the optimum is on it
        combos = np.array(list(itertools.combinations_with_replacement(feasible, len(vals))))
        best = ((combos - vals) ** 2).sum(axis=1).min()
        cost = float(np.sum((got - vals) ** 2))
        grid_gap = min(grid_gap, best - cost)
        on_grid = np.allclose(np.round(ref * 4) / 4, ref)
        mismatches += on_grid and not math.isclose(best, cost, abs_tol=1e-12)
    ok = worst <= 1e-12 and grid_gap >= -1e-12 and mismatches == 0
    report(7, ok, f"{len(instances)} instances (all of length <= 4, 3000 sampled of length "
                  f"5-6): max deviation from exhaustive search {worst:.1e}; grid search never "
                  f"better (min gap {grid_gap:.1e}); on-grid mismatches {mismatches}")


def test_criterion_8_stationarity(disk, cap_run):
    mesh, _ = disk
    fam = default_field_family(mesh)
    r1 = minimal_run(disk, 0.05)[0].trace.last.stationarity_residual
    r2 = cap_run.trace.last.stationarity_residual
    x, y = mesh.vertices.T
    witness = stationarity_residual(mesh, np.column_stack([2 * x, y, 0 * x]),
                                    np.zeros((mesh.n_vertices, 3)), fam)
    ok = r1 <= 1e-3 and r2 <= 1e-3 and witness >= 0.1
    report(8, ok, f"minimal {r1:.2e}, cap {r2:.2e} (tol 1e-3, {len(fam)} fields); "
                  f"witness (2x, y, 0) {witness:.3f} (needs >= 0.1)")


def test_criterion_9_time_step_consistency(disk):
    mesh, _ = disk
    runs = {h: minimal_run(disk, h)[0] for h in (0.1, 0.05, 0.025)}
    coarse = l2_norm(mesh, runs[0.1].surface - runs[0.05].surface)
    fine = l2_norm(mesh, runs[0.025].surface - runs[0.05].surface)
    ratio = fine / coarse
    ok = all(r.converged for r in runs.values()) and ratio <= 0.7
    steps = "/".join(str(runs[h].trace.last.step) for h in (0.1, 0.05, 0.025))
    report(9, ok, f"|u(0.025) - u(0.05)| = {fine:.3e}, |u(0.1) - u(0.05)| = {coarse:.3e}, "
                  f"ratio {ratio:.3f} (tol 0.7); steps {steps}")
