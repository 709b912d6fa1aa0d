import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from symred.builtins import KLEIN_GENERATORS, SO3_BASIS
from symred.errors import PreconditionError
from symred.groups import (
    FiniteMatrixGroup,
    MatrixLieAlgebra,
    Torus,
    close_group,
    lie_generators,
    momentum_map,
    orbit_type,
    to_float,
)
from symred.invariants import invariant_generators
from symred.strata import (
    abelian_model_level_set,
    conjugate_spec,
    enumerate_strata,
    frontier_diagnostic,
    local_model_base_points,
    local_model_match,
    mwm_stratum,
    sampled_stratum_dim,
    slice_invariants,
    slice_model,
    stratification_report,
    torus_pattern_feasible,
    zero_level_sampler,
)

Z2 = FiniteMatrixGroup(([[-1, 0], [0, -1]],))
KLEIN = FiniteMatrixGroup(tuple(KLEIN_GENERATORS))
CIRCLE = Torus(((1, -1),))
SO3 = MatrixLieAlgebra(tuple(SO3_BASIS))
T2 = Torus(((1, -1, 0), (0, 1, -1)))
C112 = Torus(((1, 1, -2),))
C2 = Torus(((2, -2),))

# M = [[I, S], [0, I]] with S symmetric is symplectic
SHEAR = [[1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]]


def _orbit_rank(spec, v):
    M = np.column_stack([to_float(X) @ v for X in lie_generators(spec)])
    return np.linalg.matrix_rank(M, tol=1e-9)


def _fd_stratum_dim(spec, v, h=1e-6):
    """Oracle: dim V^H - rank dF|V^H - orbit dim, with a finite-difference Jacobian."""
    F = momentum_map(spec)
    d = spec.dim
    gens = [to_float(X) for X in lie_generators(spec)]
    # fixed space of the identity component: common kernel of the isotropy algebra
    A = np.column_stack([X @ v for X in gens])
    iso = sympy.Matrix(np.round(A, 12)).nullspace() if A.size else []
    Hgens = [sum(float(c) * X for c, X in zip(vec, gens)) for vec in iso]
    if Hgens:
        K = np.vstack(Hgens)
        _, s, Vt = np.linalg.svd(K)
        B = Vt[(s > 1e-9).sum():].T
    else:
        B = np.eye(d)
    J = np.column_stack([(F(v + h * b) - F(v - h * b)) / (2 * h) for b in B.T])
    r = np.linalg.matrix_rank(J, tol=1e-6) if J.size else 0
    return B.shape[1] - r - _orbit_rank(spec, v)


# -- zero level sampler -------------------------------------------------------


def test_sampler_circle_points_satisfy_equal_moduli():
    s = zero_level_sampler(momentum_map(CIRCLE), 50, 1.0, seed=3)
    P = s.points
    assert len(P) == 50 and s.shortfall == 0
    assert np.allclose(P[:, 0] ** 2 + P[:, 2] ** 2, P[:, 1] ** 2 + P[:, 3] ** 2, atol=1e-10)
    assert np.all(np.linalg.norm(P, axis=1) <= 1.0 + 1e-12)


def test_sampler_so3_points_have_parallel_q_p():
    P = zero_level_sampler(momentum_map(SO3), 30, 2.0, seed=5).points
    assert np.abs(np.cross(P[:, :3], P[:, 3:])).max() < 1e-9


def test_sampler_is_deterministic():
    F = momentum_map(CIRCLE)
    a = zero_level_sampler(F, 10, seed=8).points
    b = zero_level_sampler(F, 10, seed=8).points
    assert np.array_equal(a, b)


def test_sampler_finite_group_is_unconstrained():
    P = zero_level_sampler(momentum_map(KLEIN), 5, seed=1).points
    assert P.shape == (5, 4)


# -- enumerated strata --------------------------------------------------------


@pytest.mark.parametrize("spec,dims,ncand", [
    (Z2, [0, 2], 2),
    (KLEIN, [0, 2, 2, 4], 5),
    (CIRCLE, [0, 2], 2),
    (T2, [0, 2], 2),
    (C112, [0, 4], 2),
    (C2, [0, 2], 2),
])
def test_strata_dims_and_candidates(spec, dims, ncand):
    strat = enumerate_strata(spec, seed=1)
    assert strat.dims() == dims
    assert len(strat.candidate_classes) == ncand
    assert strat.is_partial_order()
    assert strat.exact


def test_so3_strata():
    strat = enumerate_strata(SO3, seed=2)
    assert strat.dims() == [0, 2]
    assert sorted(s.isotropy_dim for s in strat.strata) == [1, 3]
    assert not strat.exact
    assert strat.is_partial_order()


@pytest.mark.parametrize("spec", [CIRCLE, T2, C112, SO3])
def test_stratum_dims_against_finite_difference_oracle(spec):
    strat = enumerate_strata(spec, seed=4)
    for s in strat.strata:
        if np.abs(s.representative).max() == 0:
            assert s.stratum_dim == 0
            continue
        assert s.stratum_dim == _fd_stratum_dim(spec, s.representative)


def test_finite_stratum_dims_are_fixed_space_dims():
    strat = enumerate_strata(KLEIN)
    for s in strat.strata:
        # oracle: common kernel of (g - I) over the isotropy group, in sympy
        M = sympy.Matrix.vstack(*[sympy.Matrix(g) - sympy.eye(4) for g in s.subgroup])
        assert s.stratum_dim == 4 - M.rank()


def test_klein_diagonal_subgroup_is_not_realized():
    strat = enumerate_strata(KLEIN)
    assert len(strat.candidate_classes) == 5
    assert len(strat.strata) == 4
    minus_one = next(g for g in close_group(KLEIN) if np.allclose(to_float(g), -np.eye(4)))
    # {I, -I} fixes only the origin, whose isotropy is the whole group
    assert not any(len(s.subgroup) == 2 and minus_one in s.subgroup for s in strat.strata)


def test_conjugation_invariance():
    conj = conjugate_spec(KLEIN, SHEAR)
    a, b = enumerate_strata(KLEIN), enumerate_strata(conj)
    assert a.dims() == b.dims()
    assert len(a.candidate_classes) == len(b.candidate_classes)
    assert len(a.hasse()) == len(b.hasse())


def test_conjugate_spec_rejects_non_symplectic():
    with pytest.raises(PreconditionError):
        conjugate_spec(KLEIN, [[2, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])


def test_klein_hasse_diagram():
    strat = enumerate_strata(KLEIN)
    edges = strat.hasse()
    assert len(edges) == 4
    # bottom is the origin (order 4), top the regular stratum (order 1)
    assert all(lo.startswith("order4") for lo, up in edges if up.startswith("order2"))
    assert all(up.startswith("order1") for lo, up in edges if lo.startswith("order2"))


@pytest.mark.parametrize("spec", [Z2, KLEIN, CIRCLE, T2, SO3])
def test_frontier_condition(spec):
    rows = frontier_diagnostic(enumerate_strata(spec, seed=1))
    assert rows and all(r["ok"] for r in rows)


def test_torus_pattern_feasibility():
    assert torus_pattern_feasible(CIRCLE, [0]) is None
    r = torus_pattern_feasible(CIRCLE, [0, 1])
    assert np.allclose(r, [1, 1])
    r = torus_pattern_feasible(C112, [0, 1, 2])
    assert r is not None and np.all(r > 0) and abs(r[0] + r[1] - 2 * r[2]) < 1e-12


@given(st.integers(0, 10_000))
def test_zero_level_points_land_in_enumerated_classes(seed):
    for spec in (CIRCLE, T2):
        strat = enumerate_strata(spec, seed=0, with_slices=False)
        classes = {s.isotropy_class for s in strat.strata}
        for v in zero_level_sampler(momentum_map(spec), 5, 1.0, seed).points:
            assert orbit_type(spec, v) in classes
            assert sampled_stratum_dim(spec, v) <= max(strat.dims())


def test_stratification_report_circle():
    strat = enumerate_strata(CIRCLE)
    rep = stratification_report(strat, invariant_generators(CIRCLE), momentum_map(CIRCLE))
    assert rep["candidate_classes"] == 2 and rep["realized_classes"] == 2
    assert rep["relations"] == ["y1*y2 - y3^2 - y4^2"]
    assert rep["norm_F_squared"] == "1/4*y1^2 - 1/2*y1*y2 + 1/4*y2^2"


# -- slices and local models --------------------------------------------------


def test_slice_dims_circle():
    assert slice_model(np.zeros(4), CIRCLE).W.dim == 4
    x = np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2)
    sm = slice_model(x, CIRCLE)
    assert sm.W.dim == 2
    inv = slice_invariants(sm)
    assert inv["nondegenerate"] and inv["darboux_residual"] < 1e-12 and inv["invariance_residual"] < 1e-12


def test_slice_requires_zero_level():
    with pytest.raises(PreconditionError):
        slice_model(np.array([1.0, 0.0, 0.0, 0.0]), CIRCLE)


@given(st.integers(0, 10_000))
def test_slice_dimension_property(seed):
    # on the zero level the orbit is isotropic, so dim W = dim V - 2 dim(orbit)
    for spec in (CIRCLE, SO3):
        for v in zero_level_sampler(momentum_map(spec), 3, 1.0, seed).points:
            sm = slice_model(v, spec)
            assert sm.W.dim == spec.dim - 2 * _orbit_rank(spec, v)
            inv = slice_invariants(sm)
            assert inv["nondegenerate"]
            assert inv["invariance_residual"] < 1e-9


@pytest.mark.parametrize("spec", [Z2, KLEIN, CIRCLE, T2, SO3])
def test_local_model_matches_at_base_points(spec):
    strat = enumerate_strata(spec, seed=1)
    pts = local_model_base_points(spec, 8, seed=1, strat=strat)
    assert len(pts) == 8
    for i, x in enumerate(pts):
        assert local_model_match(x, spec, seed=i, strat=strat).match


def test_local_model_finite_isotropy_is_partial():
    x = np.array([1.0, 1.0, 0.0, 0.0])
    rep = local_model_match(x, C2)
    assert rep.match and rep.partial and rep.notes


def test_mwm_klein():
    strat = enumerate_strata(KLEIN)
    for s in strat.strata:
        r = mwm_stratum(KLEIN, s.subgroup)
        assert r.sampled_ok
        assert r.reduced_dim == s.stratum_dim
        assert r.quotient_group["order"] * len(s.subgroup) == 4


def test_mwm_torus():
    for spec in (CIRCLE, T2, C112):
        for s in enumerate_strata(spec).strata:
            r = mwm_stratum(spec, s.isotropy_class)
            assert r.reduced_dim == s.stratum_dim


def test_mwm_guards():
    with pytest.raises(PreconditionError):
        mwm_stratum(CIRCLE, (0,))
    with pytest.raises(PreconditionError):
        mwm_stratum(SO3, ())


def test_abelian_level_set_has_no_spurious_solutions():
    for x in (np.zeros(4), np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2)):
        rep = abelian_model_level_set(CIRCLE, x, samples=2000, seed=2)
        assert rep.converged == 2000
        assert rep.counterexamples == 0


def test_abelian_level_set_offset_moves_off_zero():
    rep = abelian_model_level_set(CIRCLE, np.zeros(4), samples=500, offset=[1e-3])
    assert rep.offset_solutions == 0
    assert rep.max_FW == pytest.approx(1e-3, rel=1e-6)


def test_abelian_level_set_guards():
    with pytest.raises(PreconditionError):
        abelian_model_level_set(C2, np.array([1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(PreconditionError):
        abelian_model_level_set(SO3, np.zeros(6))
