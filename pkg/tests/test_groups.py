from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from symred.builtins import KLEIN_GENERATORS, SO3_BASIS
from symred.errors import AmbiguityError, DimensionError, PreconditionError
from symred.groups import (
    FiniteMatrixGroup,
    MatrixLieAlgebra,
    Torus,
    all_subgroups,
    check_equivariance,
    close_group,
    conjugate,
    fixed_subspace,
    isotropy,
    momentum_map,
    orbit_null_check,
    orbit_type,
    subgroup_classes,
    to_float,
    torus_element,
)
from symred.poly import Poly, coordinate_names, poisson_bracket
from symred.symplin import SymplecticSpace

Z2 = FiniteMatrixGroup(([[-1, 0], [0, -1]],))
ROT4 = FiniteMatrixGroup(([[0, 1], [-1, 0]],))
KLEIN = FiniteMatrixGroup(tuple(KLEIN_GENERATORS))
CIRCLE = Torus(((1, -1),))
SO3 = MatrixLieAlgebra(tuple(SO3_BASIS))


def test_close_group_orders():
    assert len(close_group(Z2)) == 2
    assert len(close_group(ROT4)) == 4
    assert len(close_group(KLEIN)) == 4
    # deterministic lexicographic order
    flat = [tuple(x for r in g for x in r) for g in close_group(ROT4)]
    assert flat == sorted(flat)


def test_group_guards():
    with pytest.raises(PreconditionError):
        FiniteMatrixGroup(([[2, 0], [0, 1]],))
    with pytest.raises(PreconditionError):
        close_group(FiniteMatrixGroup(([[0, 1], [-1, 0]],), order_bound=3))
    with pytest.raises(DimensionError):
        FiniteMatrixGroup(([[1, 0, 0], [0, 1, 0], [0, 0, 1]],))
    with pytest.raises(PreconditionError):
        MatrixLieAlgebra(([[1, 0], [0, 1]],))
    # structure constants that are not antisymmetric
    with pytest.raises(PreconditionError):
        MatrixLieAlgebra(tuple(SO3_BASIS), structure_constants=[[[0, 0, 1], [0, 0, 0], [0, 0, 0]], [[0, 0, 0]] * 3, [[0, 0, 0]] * 3])


def test_momentum_map_examples():
    F = momentum_map(CIRCLE)
    assert F.components[0].to_text() == "1/2*q1^2 - 1/2*q2^2 + 1/2*p1^2 - 1/2*p2^2"
    assert F([1, 0, 0, 0])[0] == pytest.approx(0.5)
    G = momentum_map(SO3)
    g = coordinate_names(3)
    cross = [Poly.from_text(t, g) for t in ("q2*p3 - q3*p2", "q3*p1 - q1*p3", "q1*p2 - q2*p1")]
    assert list(G.components) == cross
    assert np.allclose(G(np.zeros(6)), 0)
    assert momentum_map(Z2).algebra_dim == 0


def test_momentum_defining_identity():
    # dF_a(v) w = omega(X_a v, w), checked on random vectors
    rng = np.random.default_rng(1)
    for spec in (CIRCLE, SO3, Torus(((1, 2, 0), (0, 1, -3)))):
        F = momentum_map(spec)
        S = SymplecticSpace.standard(spec.dim // 2)
        from symred.groups import lie_generators

        for a, X in enumerate(lie_generators(spec)):
            Xf = to_float(X)
            for _ in range(5):
                v, w = rng.normal(size=(2, spec.dim))
                assert F.jacobian(v)[a] @ w == pytest.approx(S.form(Xf @ v, w))


def test_equivariance_exact():
    table = check_equivariance(momentum_map(SO3), SO3)
    assert all(r.is_zero() for row in table for r in row)
    F = momentum_map(SO3).components
    assert poisson_bracket(F[0], F[1]) == F[2]
    assert all(r.is_zero() for row in check_equivariance(momentum_map(CIRCLE), CIRCLE) for r in row)


def test_equivariance_reports_wrong_sign():
    C = SO3.structure_constants
    flipped = [[[-x for x in c] for c in row] for row in C]
    spec = MatrixLieAlgebra(tuple(SO3_BASIS), structure_constants=flipped)
    table = check_equivariance(momentum_map(spec), spec)
    assert any(not r.is_zero() for row in table for r in row)


def test_equivariance_rescaled_basis():
    basis = tuple([[2 * x for x in r] for r in X] for X in SO3_BASIS)
    spec = MatrixLieAlgebra(basis)
    assert all(r.is_zero() for row in check_equivariance(momentum_map(spec), spec) for r in row)


def test_structure_constants_so3():
    C = SO3.structure_constants
    # [e1, e2] = e3
    assert list(C[0][1]) == [0, 0, 1]
    assert list(C[1][2]) == [1, 0, 0]


def test_isotropy_examples():
    assert len(isotropy(Z2, (0, 0)).elements) == 2
    assert len(isotropy(Z2, (1, Fraction(1, 3))).elements) == 1
    assert isotropy(CIRCLE, [0, 0, 0, 0]).dim == 1
    assert isotropy(CIRCLE, [1, 0, 0, 0]).dim == 0
    assert isotropy(CIRCLE, [1, 0.5, 0, 0.3]).dim == 0
    assert isotropy(SO3, np.zeros(6)).dim == 3
    assert isotropy(SO3, [1, 0, 0, 2, 0, 0]).dim == 1
    assert isotropy(SO3, [1, 0, 0, 0, 1, 0]).dim == 0
    with pytest.raises(AmbiguityError):
        isotropy(CIRCLE, [1e-9, 1, 0, 0])
    with pytest.raises(DimensionError):
        isotropy(Z2, [1, 2, 3])


def test_torus_finite_part():
    # weights (2,) on C: isotropy of z != 0 is Z/2
    iso = isotropy(Torus(((2,),)), [1.0, 0.0])
    assert iso.dim == 0 and iso.invariant_factors == (2,)
    # isotropy dim + rank of the support weights = k
    spec = Torus(((1, 1, 0), (0, 1, 1)))
    for v in ([1, 0, 0, 0, 0, 0], [1, 1, 0, 0, 0, 0], [1, 1, 1, 0, 0, 0]):
        iso = isotropy(spec, v)
        rank = sympy.Matrix([[spec.weights[a][j] for j in iso.support] for a in range(2)]).rank() if iso.support else 0
        assert iso.dim + rank == 2


def test_klein_stabilizers():
    # five subgroup classes; stabilizers that occur: full, two factors, trivial
    assert len(subgroup_classes(KLEIN)) == 5
    seen = {orbit_type(KLEIN, v) for v in ([0, 0, 0, 0], [1, 0, 2, 0], [0, 1, 0, 3], [1, 1, 1, 1])}
    assert len(seen) == 4
    # the diagonal Z2 (product of the two flips) fixes no nonzero vector beyond the full group's
    order2 = [H for H in all_subgroups(KLEIN) if len(H) == 2]
    assert len(order2) == 3
    assert sum(fixed_subspace(KLEIN, v).dim == 2 for v in ([1, 0, 2, 0], [0, 1, 0, 3])) == 2


@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4))
def test_isotropy_equivariant(v):
    # stabilizer of g v is g Stab(v) g^-1 (abelian here, so equal)
    v = [Fraction(x) for x in v]
    elems = close_group(KLEIN)
    H = isotropy(KLEIN, v).elements
    for g in elems:
        gv = tuple(sum((a * x for a, x in zip(r, v)), Fraction(0)) for r in g)
        assert isotropy(KLEIN, gv).elements == conjugate(H, g)
    assert all(orbit_type(Z2, (a, b)) == orbit_type(Z2, (1, 0)) for a, b in [(1, 2), (-3, 1)])


@given(st.integers(0, 10**6))
def test_torus_momentum_invariant(seed):
    rng = np.random.default_rng(seed)
    spec = Torus(((1, -1, 2),))
    F = momentum_map(spec)
    z = rng.normal(size=6)
    t = torus_element(spec, rng.normal(size=1))
    assert np.allclose(F(t @ z), F(z), atol=1e-12)


def test_fixed_subspace():
    assert fixed_subspace(KLEIN, [1, 0, 2, 0]).dim == 2
    assert fixed_subspace(CIRCLE, [0, 0, 0, 0]).dim == 0
    assert fixed_subspace(SO3, [1, 0, 0, 2, 0, 0]).dim == 2


def test_orbit_null_directions():
    # the kernel of omega on the orbit tangent is spanned by the coadjoint isotropy directions
    rng = np.random.default_rng(7)
    S = SymplecticSpace.standard(3)
    for _ in range(5):
        assert orbit_null_check(SO3, S, rng.normal(size=6)) <= 1e-9
    assert orbit_null_check(SO3, S, [1, 0, 0, 2, 0, 0]) <= 1e-9
    assert orbit_null_check(CIRCLE, SymplecticSpace.standard(2), [1, 1, 0, 0]) <= 1e-9
