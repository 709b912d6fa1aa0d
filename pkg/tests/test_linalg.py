from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symred import _linalg
from symred.errors import AmbiguityError

small_int = st.integers(-4, 4)


@st.composite
def int_matrices(draw, max_rows=5, max_cols=5):
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    return [[draw(small_int) for _ in range(c)] for _ in range(r)]


def _matvec(A, x):
    return [sum((Fraction(a) * b for a, b in zip(row, x)), Fraction(0)) for row in A]


@given(int_matrices())
def test_rank_matches_floating_rank(A):
    # integer matrices this small are far from the floating rank cutoff
    assert _linalg.rank(A) == np.linalg.matrix_rank(np.array(A, dtype=float))


@given(int_matrices())
def test_nullspace_is_kernel_of_full_dimension(A):
    ncols = len(A[0])
    N = _linalg.nullspace(A, ncols)
    assert len(N) == ncols - _linalg.rank(A)
    for x in N:
        assert all(v == 0 for v in _matvec(A, x))


@given(int_matrices())
def test_rref_is_reduced(A):
    R, piv = _linalg.rref(A)
    assert len(R) == len(piv)
    for i, c in enumerate(piv):
        col = [row[c] for row in R]
        assert col == [Fraction(int(j == i)) for j in range(len(R))]
    # rref of an rref is itself
    assert _linalg.rref(R)[0] == R if R else True


@given(int_matrices(), st.lists(small_int, min_size=5, max_size=5))
def test_solve_particular(A, b):
    b = b[: len(A)]
    x = _linalg.solve_particular(A, b, len(A[0]))
    aug_rank = _linalg.rank([list(r) + [v] for r, v in zip(A, b)])
    if x is None:
        assert aug_rank > _linalg.rank(A)
    else:
        assert _matvec(A, x) == [Fraction(v) for v in b]


def test_inverse_exact():
    A = ((Fraction(2), Fraction(1)), (Fraction(5), Fraction(3)))
    Ai = _linalg.inverse_exact(A)
    assert Ai == ((3, -1), (-5, 2))
    with pytest.raises(ZeroDivisionError):
        _linalg.inverse_exact(((1, 2), (2, 4)))


def test_numerical_rank_band_raises():
    # a singular value right at the cutoff is ambiguous
    with pytest.raises(AmbiguityError):
        _linalg.numerical_rank(np.diag([1.0, 1e-9]))
    assert _linalg.numerical_rank(np.diag([1.0, 1e-15])) == 1
    assert _linalg.numerical_rank(np.diag([1.0, 1e-3])) == 2


def test_numerical_rank_absolute_floor():
    assert _linalg.numerical_rank(np.full((3, 3), 1e-17), atol=1e-12) == 0
    assert _linalg.null_basis(np.full((2, 3), 1e-17), atol=1e-12).shape == (3, 3)


@given(st.integers(1, 6), st.integers(0, 5), st.integers(0, 10**6))
def test_null_and_orth_basis(n, r, seed):
    r = min(r, n)
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, r)) @ rng.normal(size=(r, n)) if r else np.zeros((n, n))
    N = _linalg.null_basis(M, atol=1e-12)
    assert N.shape[1] == n - r
    assert np.allclose(M @ N, 0, atol=1e-9)
    if r:
        Q = _linalg.orth_basis(M)
        assert Q.shape[1] == r
        assert np.allclose(Q.T @ Q, np.eye(r), atol=1e-12)
