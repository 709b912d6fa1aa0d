import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from symred.builtins import KLEIN_GENERATORS, SO3_BASIS, builtin_config
from symred.dynamics import (
    HamiltonianSystem,
    check_noether,
    check_stratum_preservation,
    circular_orbit,
    compare_full_vs_reduced,
    cross_section_scenario,
    energy_order_test,
    eq_hamilton_residual,
    forward_backward,
    integrate_full,
    integrate_reduced,
    order_test,
    orbit_separation_check,
)
from symred.errors import PreconditionError
from symred.groups import FiniteMatrixGroup, MatrixLieAlgebra, Torus
from symred.invariants import express_in_generators, invariant_generators, reduced_structure_matrix
from symred.model import parse_hamiltonian
from symred.poly import Poly, coordinate_names

Z2 = FiniteMatrixGroup(([[-1, 0], [0, -1]],))
KLEIN = FiniteMatrixGroup(tuple(KLEIN_GENERATORS))
CIRCLE = Torus(((1, -1),))
SO3 = MatrixLieAlgebra(tuple(SO3_BASIS))


def _poly(text, n):
    return Poly.from_text(text, coordinate_names(n))


def _sys(spec, text):
    return HamiltonianSystem(spec, _poly(text, spec.dim // 2))


def test_vector_field_convention():
    # h = (q^2 + p^2)/2 gives q' = p, p' = -q
    s = _sys(Z2, "1/2*q1^2 + 1/2*p1^2")
    assert np.allclose(s.vector_field([1.0, 0.0]), [0.0, -1.0])
    assert np.allclose(s.vector_field([0.0, 1.0]), [1.0, 0.0])


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_vector_field_is_hamiltonian(v, w):
    s = _sys(CIRCLE, "q1^2 + q2^2 + p1^2 + p2^2 + q1*q2 - p1*p2")
    v, w = np.array(v), np.array(w)
    assert s.S.form(s.vector_field(v), w) == pytest.approx(s.gradient(v) @ w, abs=1e-10)


def test_harmonic_oscillator_against_closed_form():
    s = _sys(Z2, "1/2*q1^2 + 1/2*p1^2")
    v0 = np.array([0.7, -0.2])
    tr = integrate_full(s, v0, 2 * np.pi, 2 * np.pi / 4000)
    t = tr.times
    exact = np.column_stack([v0[0] * np.cos(t) + v0[1] * np.sin(t), -v0[0] * np.sin(t) + v0[1] * np.cos(t)])
    assert np.abs(tr.states - exact).max() < 1e-6
    assert np.linalg.norm(tr.states[-1] - v0) < 1e-6


def test_constant_hamiltonian_is_stationary():
    s = _sys(KLEIN, "3")
    tr = integrate_full(s, [0.3, 0.1, -0.2, 0.5], 1.0, 0.01)
    assert np.all(tr.states == tr.states[0])


def test_nonlinear_flow_against_scipy():
    cfg = builtin_config("klein_r4")
    h = parse_hamiltonian(cfg["hamiltonian"], 2)
    s = HamiltonianSystem(KLEIN, h)
    v0 = np.array([0.4, -0.3, 0.2, 0.5])
    tr = integrate_full(s, v0, 3.0, 1e-3)
    ref = solve_ivp(lambda t, y: s.vector_field(y), (0, 3.0), v0, rtol=1e-12, atol=1e-12, t_eval=tr.times[::100])
    assert np.abs(ref.y.T - tr.states[::100]).max() < 1e-8


def test_step_defect_triggers_halving():
    s = _sys(Z2, "1/2*q1^2 + 1/2*p1^2")
    tr = integrate_full(s, [1.0, 0.0], 1.0, 0.5)
    assert tr.halvings >= 1
    assert tr.dt < 0.5


def test_integrate_guards():
    s = _sys(Z2, "q1^2")
    with pytest.raises(PreconditionError):
        integrate_full(s, [1.0, 0.0], 1.0, 2.0)
    with pytest.raises(PreconditionError):
        _sys(Z2, "q1")  # not invariant
    with pytest.raises(PreconditionError):
        HamiltonianSystem(KLEIN, _poly("q1^2", 1))


def test_black_box_hamiltonian():
    s = HamiltonianSystem(CIRCLE, lambda v: float(v @ v) + float(v @ v) ** 2)
    assert s.invariance_residual < 1e-10
    g = s.gradient(np.array([0.1, 0.2, 0.3, 0.4]))
    v = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(g, 2 * v + 4 * (v @ v) * v, atol=1e-8)
    with pytest.raises(PreconditionError):
        HamiltonianSystem(CIRCLE, lambda v: float(v[0]))


# -- conserved quantities -----------------------------------------------------


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_noether_circle(v0):
    s = _sys(CIRCLE, "q1^2 + q2^2 + p1^2 + p2^2 + 1/4*q1^2*q2^2 + 1/4*q1^2*p2^2 + 1/4*p1^2*q2^2 + 1/4*p1^2*p2^2")
    tr = integrate_full(s, v0, 2.0, 1e-2)
    assert check_noether(tr) < 1e-8
    assert tr.energy_drift < 1e-6


def test_noether_so3():
    s = HamiltonianSystem(SO3, parse_hamiltonian("builtin:central_force", 3))
    tr = integrate_full(s, [1.0, 0.2, -0.3, 0.1, 0.9, 0.4], 10.0, 1e-3)
    assert check_noether(tr) < 1e-8
    assert tr.energy_drift < 1e-8


def test_stratum_preservation_klein():
    h = parse_hamiltonian(builtin_config("klein_r4")["hamiltonian"], 2)
    s = HamiltonianSystem(KLEIN, h)
    tr = integrate_full(s, [0.0, 0.7, 0.0, -0.4], 10.0, 1e-3)
    assert check_stratum_preservation(tr, KLEIN) == 0.0
    assert np.all(tr.states[:, [0, 2]] == 0)


# -- reduced dynamics ---------------------------------------------------------


def test_reduced_cone_period():
    # h = q^2 + p^2 has period pi upstairs; its square invariants have period pi/2
    H = invariant_generators(Z2)
    P = reduced_structure_matrix(H)
    h_red = express_in_generators(_poly("q1^2 + p1^2", 1), H)
    y0 = H(np.array([0.8, -0.3]))
    tr = integrate_reduced(P, h_red, y0, np.pi / 2, np.pi / 2 / 2000)
    assert np.linalg.norm(tr.states[-1] - y0) < 1e-8
    assert np.all(np.isnan(tr.stratum_dist))
    # the Casimir y1*y3 - y2^2 stays at zero on the cone
    assert np.abs(tr.states[:, 0] * tr.states[:, 2] - tr.states[:, 1] ** 2).max() < 1e-9


def test_twin_circle():
    H = invariant_generators(CIRCLE)
    P = reduced_structure_matrix(H)
    s = _sys(CIRCLE, "q1^2 + q2^2 + p1^2 + p2^2")
    tw = compare_full_vs_reduced(s, H, P, [0.6, 0.2, -0.1, 0.45], 5.0, 1e-3)
    assert tw.max_deviation < 1e-6
    assert tw.h_red.to_text() == "y1 + y2"
    assert eq_hamilton_residual(tw.full, H, P, tw.h_red) < 1e-5


def test_twin_order_ratio():
    H = invariant_generators(Z2)
    P = reduced_structure_matrix(H)
    s = _sys(Z2, "q1^2 + p1^2 + 1/2*q1^4")
    r = order_test(s, H, P, [0.8, -0.3], 5.0, 0.02)
    assert 12 <= r["ratio"] <= 20


def test_energy_order_for_linear_flow():
    s = _sys(Z2, "q1^2 + p1^2")
    r = energy_order_test(s, [0.8, -0.3], 5.0, 0.02)
    # RK4 on a linear flow loses energy at O(dt^5) per unit time
    assert 28 <= r["ratio"] <= 36


def test_forward_backward():
    H = invariant_generators(Z2)
    P = reduced_structure_matrix(H)
    h_red = express_in_generators(_poly("q1^2 + p1^2 + q1^4", 1), H)
    assert forward_backward(P, h_red, H(np.array([0.5, 0.4])), 2.0, 1e-3) < 1e-9


def test_orbit_separation_klein():
    r = orbit_separation_check(KLEIN, invariant_generators(KLEIN), samples=40, seed=3)
    assert r["agree"] == 40 and not r["disagree"]
    with pytest.raises(PreconditionError):
        orbit_separation_check(CIRCLE, invariant_generators(CIRCLE))


def test_reduced_guards():
    H = invariant_generators(Z2)
    P = reduced_structure_matrix(H)
    with pytest.raises(PreconditionError):
        integrate_reduced(P, _poly("q1^2", 1), [1.0, 0.0, 0.0], 1.0, 0.1)
    s = HamiltonianSystem(Z2, lambda v: float(v @ v))
    with pytest.raises(PreconditionError):
        compare_full_vs_reduced(s, H, P, [1.0, 0.0], 1.0, 0.1)


# -- cross section ------------------------------------------------------------


def test_cross_section_circular_orbit():
    s = HamiltonianSystem(SO3, parse_hamiltonian("builtin:central_force", 3))
    v0 = circular_orbit(1.0)
    rep = cross_section_scenario(s, [0.5, 3.0], v0, 20.0, 1e-3, circular=True)
    assert rep.ell == pytest.approx(np.sqrt(2))
    assert rep.out_of_plane == 0.0
    assert rep.L_perp < 1e-12
    assert rep.L_norm_drift < 1e-8
    assert rep.in_interval
    assert rep.period_rel_error < 1e-6
    assert rep.radius_drift < 1e-8


def test_cross_section_generic_start():
    s = HamiltonianSystem(SO3, parse_hamiltonian("builtin:central_force", 3))
    rep = cross_section_scenario(s, [0.5, 3.0], [1.0, 0.3, 0.0, -0.2, 1.1, 0.0], 10.0, 1e-3)
    assert rep.out_of_plane == 0.0
    assert rep.L3_drift < 1e-8
    assert rep.period is None


def test_cross_section_guards():
    s = HamiltonianSystem(SO3, parse_hamiltonian("builtin:central_force", 3))
    with pytest.raises(PreconditionError):
        cross_section_scenario(s, [0.5, 1.0], circular_orbit(1.0), 1.0)
    with pytest.raises(PreconditionError):
        cross_section_scenario(s, [0.5, 3.0], [1.0, 0.0, 0.0, 0.0, 0.0, 1.0], 1.0)


def test_csv_output(tmp_path):
    s = _sys(CIRCLE, "q1^2 + q2^2 + p1^2 + p2^2")
    tr = integrate_full(s, [0.6, 0.2, -0.1, 0.45], 0.1, 0.01)
    tr.to_csv(tmp_path / "t.csv", stride=5)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "x1", "x2", "x3", "x4", "h", "F1", "stratum_dist"]
    assert len(rows) == 1 + 3
    assert float(rows[2][0]) == pytest.approx(0.05)
