import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hflow.admissibility import (SurfaceState, anchor_lock, bump, check_conditions, check_h4,
                                 energy_cap, harmonic_state, initial_phases, is_monotone,
                                 level_volume, project_monotone, realize, sigma,
                                 state_from_surface)
from hflow.curvature import Callback, Constant, Radial
from hflow.curve import circle_curve, ellipse_curve
from hflow.errors import InfeasibleAnchors, ObstacleViolation
from hflow.mesh import build_disk_mesh
from hflow.obstacle import AllSpace, Ball

from oracles import brute_force_isotonic, grid_isotonic

TWO_PI = 2 * math.pi


def arc_instance(values, lo, hi):
    """Embed one arc (with its two anchor ends) into a cyclic three-anchor problem."""
    free = list(values)
    n_free = len(free)
    phases = [lo] + free + [hi, hi + 0.5, hi + 1.0]
    pos = [0, n_free + 1, n_free + 3]
    vals = [lo, hi, hi + 1.0]
    return np.array(phases), pos, vals


def project_arc(values, lo, hi, w=None):
    phases, pos, vals = arc_instance(values, lo, hi)
    weights = None if w is None else np.concatenate([[1.0], w, [1.0, 1.0, 1.0]])
    out = project_monotone(phases, pos, vals, weights)
    return out[1:len(values) + 1]


# ---------------------------------------------------------------- monotone projection

def test_projection_examples():
    np.testing.assert_allclose(project_arc([2, 1], 0, 3), [1.5, 1.5])
    np.testing.assert_allclose(project_arc([3, 2, 1], 0, 4), [2, 2, 2])


def test_feasible_input_unchanged():
    phases, pos, vals = arc_instance([0.5, 0.5, 1.0, 2.5], 0.0, 3.0)
    np.testing.assert_array_equal(project_monotone(phases, pos, vals), phases)


def test_infeasible_anchors_rejected():
    with pytest.raises(InfeasibleAnchors):
        project_monotone(np.zeros(9), [0, 3, 6], [0.0, 2.0, 1.0])
    with pytest.raises(InfeasibleAnchors):
        project_monotone(np.zeros(9), [0, 3, 6], [0.0, 2.0, 7.0])


def test_wraparound_arc():
    # the arc from the last anchor back to the first crosses the end of the loop
    phases = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 6.5, 6.1])
    pos, vals = [0, 3, 6], [0.0, 3.0, 4.0]
    out = project_monotone(phases, pos, vals)
    # wrapped values 6.5 and 6.1 - 2pi + 2pi lie in [4, 2pi]; 6.5 clamps to 2pi
    ext = np.concatenate([out[6:], out[:1] + TWO_PI])
    assert np.all(np.diff(ext) >= 0)
    assert out[0] == 0.0 and out[3] == 3.0 and out[6] == 4.0


values6 = st.lists(st.sampled_from(np.arange(-2, 9) * 0.25), min_size=1, max_size=5)


@given(values6)
def test_projection_matches_exhaustive_search(vals):
    got = project_arc(vals, 0.0, 1.5)
    ref = brute_force_isotonic(vals, 0.0, 1.5)
    np.testing.assert_allclose(got, ref, atol=1e-12)


@given(st.lists(st.floats(-1, 3), min_size=1, max_size=5),
       st.lists(st.floats(0.1, 5.0), min_size=5, max_size=5))
def test_weighted_projection_matches_exhaustive_search(vals, w):
    w = np.array(w[:len(vals)])
    got = project_arc(vals, 0.0, 2.0, w)
    ref = brute_force_isotonic(vals, 0.0, 2.0, w)
    cost = lambda x: float(np.sum(w * (x - np.array(vals)) ** 2))
    assert cost(got) <= cost(ref) + 1e-12
    np.testing.assert_allclose(got, ref, atol=1e-9)


@given(st.lists(st.floats(-0.5, 1.5), min_size=1, max_size=3))
def test_projection_beats_fine_grid(vals):
    got = project_arc(vals, 0.0, 1.0)
    _, grid_cost = grid_isotonic(vals, 0.0, 1.0, 0.01)
    cost = float(np.sum((got - np.array(vals)) ** 2))
    assert cost <= grid_cost + 1e-12
    assert grid_cost - cost <= 3 * 0.01 * len(vals)  # rounding to the grid costs little


@given(st.lists(st.floats(-1, 8), min_size=12, max_size=12))
def test_projection_idempotent_and_feasible(raw):
    m = build_disk_mesh(12, 2)
    c = circle_curve(12)
    pos, vals = anchor_lock(m, c)
    out = project_monotone(np.array(raw), pos, vals)
    np.testing.assert_array_equal(project_monotone(out, pos, vals), out)
    assert is_monotone(m, c, out)
    realize(m, c, None, SurfaceState(np.zeros((len(m.interior), 3)), out))


# ---------------------------------------------------------------- states

def test_realize_identity_phases_is_flat_disk():
    m, c = build_disk_mesh(24, 3), circle_curve(24)
    st0 = harmonic_state(m, c)
    np.testing.assert_allclose(st0.phases, m.boundary_angles - np.where(
        np.arange(24) == 0, 0, 0), atol=1e-15)
    np.testing.assert_allclose(realize(m, c, None, st0), m.embed(), atol=1e-12)


def test_shifted_phases_break_anchor_lock():
    m, c = build_disk_mesh(24, 3), circle_curve(24)
    st0 = harmonic_state(m, c)
    shifted = SurfaceState(st0.interior, st0.phases + 0.1)
    with pytest.raises(InfeasibleAnchors):
        realize(m, c, None, shifted)


def test_constant_arcs_are_accepted():
    m, c = build_disk_mesh(24, 3), circle_curve(24)
    st0 = harmonic_state(m, c)
    phi = st0.phases.copy()
    phi[2:6] = phi[2]
    assert is_monotone(m, c, phi)
    u = realize(m, c, None, SurfaceState(st0.interior, phi))
    b = m.boundary_loop
    np.testing.assert_array_equal(u[b[3]], u[b[2]])


def test_curve_outside_obstacle():
    m, c = build_disk_mesh(12, 2), circle_curve(12)
    with pytest.raises(ObstacleViolation):
        realize(m, c, Ball((0, 0, 0), 0.5), harmonic_state(m, c))


def test_state_round_trip_through_surface():
    m, c = build_disk_mesh(24, 3), ellipse_curve(30, 1.5, 1.0)
    st0 = bump(m, harmonic_state(m, c), 0.3)
    u = realize(m, c, None, st0)
    st1 = state_from_surface(m, c, u)
    np.testing.assert_allclose(st1.phases, st0.phases, atol=1e-9)
    np.testing.assert_array_equal(st1.interior, st0.interior)


def test_initial_phases_hit_anchors():
    m, c = build_disk_mesh(30, 3), ellipse_curve(36, 2.0, 1.0, anchors=(3, 14, 27))
    phi = initial_phases(m, c)
    pos, vals = anchor_lock(m, c)
    np.testing.assert_array_equal(phi[pos], vals)
    assert is_monotone(m, c, phi)


# ---------------------------------------------------------------- conditions on H

def test_ball_specialization_reject():
    rep = check_conditions(Constant(1.4), Ball((0, 0, 0), 1.0), circle_curve(24, radius=0.5), 1.0,
                           1 / 3)
    assert rep.conditions["H3"]["pass"] and rep.conditions["H3"]["threshold"] == pytest.approx(1.5)
    assert not rep.conditions["rand"]["pass"] and rep.conditions["rand"]["threshold"] == 1.0
    assert not rep.admissible
    assert rep.to_dict()["rand"]["pass"] is False


def test_ball_specialization_accept():
    rep = check_conditions(Constant(0.9), Ball((0, 0, 0), 1.0), circle_curve(24, radius=0.5), 1.0,
                           1 / 3)
    assert rep.conditions["H3"]["pass"] and rep.conditions["rand"]["pass"]
    assert rep.admissible


@pytest.mark.parametrize("A", [AllSpace(), Ball((0, 0, 0), 2.0), Ball((1, 0, 0), 5.0)])
def test_zero_curvature_passes_everything(A):
    rep = check_conditions(Constant(0.0), A, circle_curve(24), math.pi, 0.5, 100.0)
    failed = [k for k, v in rep.conditions.items() if not v["pass"]]
    # an unbounded obstacle cannot satisfy the bounded-domain conditions
    expected = ["H2", "H3"] if isinstance(A, AllSpace) else []
    assert failed == expected
    assert rep.admissible


def test_h1_threshold():
    rep = check_conditions(Constant(0.8), AllSpace(), None, math.pi, 1 / 3)
    assert rep.conditions["H1"]["threshold"] == pytest.approx(math.sqrt(2 / 3))
    assert rep.conditions["H1"]["pass"]


def test_h2_empty_when_ball_bound_holds():
    for R in (0.5, 1.0, 3.0):
        rep = check_conditions(Constant(0.99 * 1.5 / R), Ball((0, 0, 0), R), None, 1.0, 0.5)
        assert rep.conditions["H2"]["pass"] and rep.conditions["H2"]["value"] == 0.0


def test_callback_h2_h4_marked_unsupported():
    H = Callback(lambda p: 0.1 + 0 * p[..., 0], sup_bound=0.1)
    rep = check_conditions(H, Ball((0, 0, 0), 2.0), None, 1.0, 0.5)
    assert rep.conditions["H2"]["supported"] is False
    assert rep.conditions["H4"]["supported"] is False
    assert rep.conditions["H3"]["pass"] and rep.conditions["rand"]["pass"]


def test_assum_uo_with_finite_s():
    ok = check_conditions(Constant(0.0), AllSpace(), None, 1.0, 1 / 3, 3.0)
    assert ok.conditions["assum_uo"]["pass"]  # 2 <= 3 * 2/3
    bad = check_conditions(Constant(0.0), AllSpace(), None, 1.0, 1 / 3, 2.9)
    assert not bad.conditions["assum_uo"]["pass"] and not bad.admissible


def test_level_volume_monte_carlo():
    A = Ball((0.3, 0, 0), 1.2)
    H = Radial(np.array([0, 0.4, 0.9, 1.6]), np.array([1.0, 0.7, -0.5, 0.2]), (0.0, 0.2, 0.0))
    rng = np.random.default_rng(11)
    n = 400_000
    p = rng.normal(size=(n, 3))
    p *= (rng.uniform(size=n) ** (1 / 3) / np.linalg.norm(p, axis=1))[:, None]
    p = np.asarray(A.center) + A.radius * p
    hv = np.abs(H(p))
    for tau in (0.1, 0.45, 0.6, 0.95):
        frac = np.mean(hv >= tau)
        sd = math.sqrt(frac * (1 - frac) / n) * A.volume
        assert abs(level_volume(H, A, tau) - frac * A.volume) <= 4 * sd + 1e-9


def test_h4_bound_is_an_upper_bound():
    A = Ball((0, 0, 0), 1.0)
    H = Radial(np.array([0, 0.5, 1.0]), np.array([1.2, 0.6, 0.3]))
    rep = check_h4(H, A)
    taus = np.linspace(0.01, 1.2, 400)
    exact = max(level_volume(H, A, t) * t ** 3 for t in taus) / (4 * math.pi / 3)
    assert rep["value"] >= exact - 1e-12
    assert rep["value"] <= exact * 1.05  # grid-based bound stays tight


def test_sigma_and_cap():
    assert sigma(1 / 3, 5.0) == pytest.approx(2.0)
    assert energy_cap(1 / 3, 5.0, 1.7) == pytest.approx(3.4)
    assert energy_cap(0.5, 1.0, math.pi) == pytest.approx(3 * math.pi)
    assert energy_cap(0.5, math.inf, 1.0) == math.inf
    with pytest.raises(ValueError):
        sigma(1.0, 1.0)


def test_report_serializes_infinities():
    rep = check_conditions(Constant(0.1), AllSpace(), None, 1.0, 0.3)
    d = rep.to_dict()
    assert d["sigma"] == "inf" and d["s"] == "inf"
