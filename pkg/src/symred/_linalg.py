"""Small linear-algebra helpers: exact rational (via sympy's DomainMatrix)
and tolerance-governed floating rank decisions."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .errors import AmbiguityError

RANK_RTOL = 1e-9


def _to_qq(x) -> object:
    if isinstance(x, int):
        return QQ(x)
    if isinstance(x, Fraction):
        return QQ(x.numerator, x.denominator)
    x = Fraction(x)
    return QQ(x.numerator, x.denominator)


def _from_qq(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


def _dm(rows: Sequence[Sequence], ncols: int | None = None) -> DomainMatrix:
    rows = [list(r) for r in rows]
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    return DomainMatrix([[_to_qq(x) for x in r] for r in rows], (len(rows), ncols), QQ)


def rref(rows: Sequence[Sequence], ncols: int | None = None) -> tuple[list[list[Fraction]], tuple[int, ...]]:
    """Reduced row echelon form over Q; zero rows are dropped."""
    if not rows:
        return [], ()
    R, pivots = _dm(rows, ncols).rref()
    out = [[_from_qq(x) for x in r] for r in R.to_list()[: len(pivots)]]
    return out, tuple(pivots)


def rank(rows: Sequence[Sequence], ncols: int | None = None) -> int:
    if not rows:
        return 0
    return len(rref(rows, ncols)[1])


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[list[Fraction]]:
    """Basis of {x : A x = 0}, one vector per free column (sympy convention)."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    N = _dm(rows, ncols).nullspace()
    return [[_from_qq(x) for x in r] for r in N.to_list()]


def solve_particular(rows: Sequence[Sequence], rhs: Sequence, ncols: int) -> list[Fraction] | None:
    """A solution of A x = b with free variables set to zero, or None if inconsistent."""
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    R, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        return None
    x = [Fraction(0)] * ncols
    for row, c in zip(R, pivots):
        x[c] = row[ncols]
    return x


def matmul_exact(A, B):
    n, m, p = len(A), len(B), len(B[0])
    return tuple(tuple(sum((A[i][k] * B[k][j] for k in range(m)), Fraction(0)) for j in range(p)) for i in range(n))


def inverse_exact(A):
    n = len(A)
    aug = [list(A[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    R, pivots = rref(aug, 2 * n)
    if tuple(pivots) != tuple(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return tuple(tuple(r[n:]) for r in R)


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL, band: float = 10.0, atol: float = 0.0) -> int:
    """Number of singular values above ``rtol * s_max``.

    Raises AmbiguityError when some singular value falls in
    ``[cutoff / band, cutoff * band]``.  A matrix whose largest singular
    value is at most ``atol`` counts as zero.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] <= atol:
        return 0
    cutoff = rtol * s[0]
    if np.any((s >= cutoff / band) & (s <= cutoff * band)):
        raise AmbiguityError(f"singular value within tolerance band of cutoff {cutoff:.3e}: {s}")
    return int(np.sum(s > cutoff))


def null_basis(M: np.ndarray, rtol: float = RANK_RTOL, atol: float = 0.0) -> np.ndarray:
    """Orthonormal basis (columns) of ker M."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(ncols)
    r = numerical_rank(M, rtol, atol=atol)
    _, _, vt = np.linalg.svd(M)
    return vt[r:].T.copy()


def orth_basis(M: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of the column span of M."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0))
    r = numerical_rank(M, rtol)
    u, _, _ = np.linalg.svd(M, full_matrices=False)
    return u[:, :r].copy()
