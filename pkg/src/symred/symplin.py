"""Symplectic linear algebra on a single vector space.

Convention used throughout the package: ``omega(v, w) = v^T Omega w`` with
the standard ``Omega = [[0, I], [-I, 0]]`` in (q, p) ordering, and
``tau#`` given by ``(tau# v)(w) = omega(v, w)`` so its matrix is Omega^T.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _linalg
from .errors import AmbiguityError, DimensionError, PreconditionError

J_TOL = 1e-9
NULL_ATOL = 1e-10


def standard_omega(n: int) -> np.ndarray:
    Z, I = np.zeros((n, n)), np.eye(n)
    return np.block([[Z, I], [-I, Z]])


def standard_omega_exact(n: int) -> tuple[tuple[Fraction, ...], ...]:
    rows = []
    for i in range(2 * n):
        row = [Fraction(0)] * (2 * n)
        if i < n:
            row[n + i] = Fraction(1)
        else:
            row[i - n] = Fraction(-1)
        rows.append(tuple(row))
    return tuple(rows)


@dataclass(frozen=True, eq=False)
class SymplecticSpace:
    omega: np.ndarray
    cond: float = field(init=False)

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.ndim != 2 or om.shape[0] != om.shape[1] or om.shape[0] % 2:
            raise DimensionError(f"omega must be square of even size, got {om.shape}")
        if not np.allclose(om, -om.T, atol=0.0, rtol=0.0):
            raise PreconditionError("omega is not skew-symmetric")
        c = np.linalg.cond(om)
        if not np.isfinite(c) or c > 1e12:
            raise PreconditionError(f"omega is degenerate (condition number {c:.3e})")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "cond", float(c))

    @classmethod
    def standard(cls, n: int) -> SymplecticSpace:
        return cls(standard_omega(n))

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    @property
    def n(self) -> int:
        return self.dim // 2

    def is_standard(self) -> bool:
        return bool(np.array_equal(self.omega, standard_omega(self.n)))

    def form(self, v, w) -> float:
        return float(np.asarray(v) @ self.omega @ np.asarray(w))


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column span of ``basis``.  Object-dtype bases are handled exactly."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis)
        if B.ndim == 1:
            B = B.reshape(-1, 1) if B.size else np.zeros((self.ambient_dim, 0))
        if B.shape[0] != self.ambient_dim:
            raise DimensionError(f"basis has {B.shape[0]} rows, ambient dimension is {self.ambient_dim}")
        if B.dtype != object:
            B = B.astype(float)
        if B.shape[1]:
            r = _linalg.rank(B.T.tolist(), self.ambient_dim) if B.dtype == object else _linalg.numerical_rank(B)
            if r != B.shape[1]:
                raise PreconditionError(f"basis is rank deficient ({r} < {B.shape[1]})")
        object.__setattr__(self, "basis", B)

    @classmethod
    def span(cls, vectors, ambient_dim: int) -> Subspace:
        """Subspace spanned by possibly dependent vectors (floating)."""
        V = np.asarray(vectors, dtype=float).reshape(-1, ambient_dim).T if len(vectors) else np.zeros((ambient_dim, 0))
        return cls(ambient_dim, _linalg.orth_basis(V))

    @classmethod
    def zero(cls, ambient_dim: int) -> Subspace:
        return cls(ambient_dim, np.zeros((ambient_dim, 0)))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def exact(self) -> bool:
        return self.basis.dtype == object

    def orthonormal(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((self.ambient_dim, 0))
        q, _ = np.linalg.qr(self.basis.astype(float))
        return q

    def projector(self) -> np.ndarray:
        Q = self.orthonormal()
        return Q @ Q.T

    def distance(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.projector() @ v))


def subspace_gap(U: Subspace, V: Subspace) -> float:
    """Largest principal-angle sine between two subspaces (1.0 if dims differ)."""
    if U.dim != V.dim:
        return 1.0
    if U.dim == 0:
        return 0.0
    return float(np.linalg.norm(U.projector() - V.projector(), 2))


def symplectic_perp(W: Subspace, S: SymplecticSpace) -> Subspace:
    """{v : omega(w, v) = 0 for all w in W}."""
    if W.ambient_dim != S.dim:
        raise DimensionError(f"subspace lives in R^{W.ambient_dim}, space is R^{S.dim}")
    if W.exact:
        if not S.is_standard():
            raise PreconditionError("exact mode requires the standard form")
        om = standard_omega_exact(S.n)
        rows = [[sum((Fraction(W.basis[k, c]) * om[k][j] for k in range(S.dim)), Fraction(0)) for j in range(S.dim)]
                for c in range(W.dim)]
        ns = _linalg.nullspace(rows, S.dim)
        B = np.empty((S.dim, len(ns)), dtype=object)
        for c, vec in enumerate(ns):
            B[:, c] = vec
        return Subspace(S.dim, B)
    if W.dim == 0:
        return Subspace(S.dim, np.eye(S.dim))
    return Subspace(S.dim, _linalg.null_basis(W.basis.T @ S.omega))


# --------------------------------------------------------------------------
# adapted almost complex structures


@dataclass(frozen=True, eq=False)
class AdaptedComplexStructure:
    J: np.ndarray
    A: np.ndarray
    P: np.ndarray
    metric_g: np.ndarray
    omega: np.ndarray

    def metric(self) -> np.ndarray:
        """Matrix of g_J(v, w) = omega(v, J w)."""
        return self.omega @ self.J

    def residuals(self) -> dict[str, float]:
        J, Om = self.J, self.omega
        n2 = J.shape[0]
        return {
            "J2_plus_I": float(np.linalg.norm(J @ J + np.eye(n2)) / np.linalg.norm(J) ** 2),
            "symplectic": float(np.linalg.norm(J.T @ Om @ J - Om) / np.linalg.norm(Om)),
            "min_eig_gJ": float(np.linalg.eigvalsh(0.5 * (Om @ J + (Om @ J).T)).min()),
        }

    def check(self, tol: float = J_TOL) -> bool:
        r = self.residuals()
        return r["J2_plus_I"] <= tol and r["symplectic"] <= tol and r["min_eig_gJ"] > 0


def adapted_complex_structure(S: SymplecticSpace, g) -> AdaptedComplexStructure:
    """Polar-decomposition construction J = A P^{-1}, A = g^{-1} Omega^T, P = sqrt(-A^2)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (S.dim, S.dim):
        raise DimensionError(f"metric shape {g.shape} does not match dimension {S.dim}")
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-14 * np.abs(g).max()):
        raise PreconditionError("metric is not symmetric")
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise PreconditionError("metric is not positive definite") from exc
    Om = S.omega
    A = np.linalg.solve(g, Om.T)
    # in a g-orthonormal frame A becomes skew, so -A^2 is symmetric positive definite
    Linv = np.linalg.inv(L)
    At = L.T @ A @ Linv.T
    M = -(At @ At)
    M = 0.5 * (M + M.T)
    evals, V = np.linalg.eigh(M)
    if evals.min() <= 0:
        raise PreconditionError("eigensolver returned a non-positive eigenvalue for -A^2")
    Pt = (V * np.sqrt(evals)) @ V.T
    Pt_inv = (V / np.sqrt(evals)) @ V.T
    P = Linv.T @ Pt @ L.T
    P_inv = Linv.T @ Pt_inv @ L.T
    J = A @ P_inv
    return AdaptedComplexStructure(J=J, A=A, P=P, metric_g=g, omega=np.array(Om))


def group_invariant_metric(elements, base=None) -> np.ndarray:
    """Average a metric over a finite list of matrices: (1/|K|) sum k^T g k."""
    mats = [np.asarray(k, dtype=float) for k in elements]
    d = mats[0].shape[0]
    g = np.eye(d) if base is None else np.asarray(base, dtype=float)
    return sum(k.T @ g @ k for k in mats) / len(mats)


# --------------------------------------------------------------------------
# constant-rank splitting


@dataclass(frozen=True, eq=False)
class ConstantRankData:
    nu: Subspace
    E: Subspace
    N: Subspace
    Jnu: Subspace

    def gram(self, S: SymplecticSpace) -> np.ndarray:
        B = np.hstack([self.E.basis, self.N.basis, self.nu.basis, self.Jnu.basis]).astype(float)
        return B.T @ S.omega @ B

    def block_sizes(self) -> tuple[int, int, int, int]:
        return (self.E.dim, self.N.dim, self.nu.dim, self.Jnu.dim)


def constant_rank_split(W: Subspace, S: SymplecticSpace, J: AdaptedComplexStructure) -> ConstantRankData:
    """Split R^2n = E + N + (nu + J nu) around a subspace W."""
    if W.ambient_dim != S.dim:
        raise DimensionError("subspace and space have different dimensions")
    if not J.check():
        raise PreconditionError(f"complex structure is not adapted: {J.residuals()}")
    if not np.allclose(J.omega, S.omega):
        raise PreconditionError("complex structure was built for a different form")
    d = S.dim
    if W.dim == 0:
        Z = Subspace.zero(d)
        return ConstantRankData(nu=Z, E=Z, N=Subspace(d, np.eye(d)), Jnu=Z)
    B = W.orthonormal()
    G = B.T @ S.omega @ B
    # B is orthonormal, so an isotropic W gives G at rounding level
    K = _linalg.null_basis(G, atol=NULL_ATOL * np.abs(S.omega).max())
    nu = B @ K
    Jnu = J.J @ nu
    gJ = J.metric()
    gJ = 0.5 * (gJ + gJ.T)
    if nu.shape[1]:
        # g_J-orthogonal complement of nu inside W
        C = _linalg.null_basis(nu.T @ gJ @ B)
        E = B @ C
    else:
        E = B
    big = np.hstack([B, Jnu])
    N = _linalg.null_basis(big.T @ S.omega)
    return ConstantRankData(
        nu=Subspace(d, nu),
        E=Subspace(d, E),
        N=Subspace(d, N),
        Jnu=Subspace(d, Jnu),
    )


def darboux_basis(B: np.ndarray, omega: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Columns C spanning span(B) with C^T omega C standard, by symplectic Gram-Schmidt."""
    vecs = [B[:, i].astype(float) for i in range(B.shape[1])]
    es, fs = [], []
    while vecs:
        e = vecs.pop(0)
        pairings = [abs(e @ omega @ f) for f in vecs]
        pair = int(np.argmax(pairings)) if pairings and max(pairings) > tol else None
        if pair is None:
            if np.linalg.norm(e) > tol:
                raise AmbiguityError("restricted form is degenerate on the given span")
            continue
        f = vecs.pop(pair)
        f = f / (e @ omega @ f)
        rest = []
        for v in vecs:
            v = v - (v @ omega @ f) * e + (v @ omega @ e) * f
            rest.append(v)
        vecs = rest
        es.append(e)
        fs.append(f)
    return np.column_stack(es + fs) if es else np.zeros((B.shape[0], 0))


def kks_pairing(structure_constants, alpha, xi, eta) -> float:
    """<[xi, eta], alpha> with C[a, b, :] the coordinates of [X_a, X_b]."""
    C = np.asarray(structure_constants, dtype=float)
    xi, eta, alpha = (np.asarray(x, dtype=float) for x in (xi, eta, alpha))
    k = C.shape[0] if C.ndim == 3 else 0
    if not (xi.shape == eta.shape == alpha.shape == (k,)):
        raise DimensionError("covector and algebra elements must match the algebra dimension")
    if k == 0:
        return 0.0
    return float(np.einsum("a,b,abc,c->", xi, eta, C, alpha))


def kks_matrix(structure_constants, alpha) -> np.ndarray:
    """K[a, b] = <[X_a, X_b], alpha>; its kernel is the coadjoint isotropy algebra."""
    C = np.asarray(structure_constants, dtype=float)
    if C.ndim != 3 or C.shape[0] == 0:
        return np.zeros((0, 0))
    return np.einsum("abc,c->ab", C, np.asarray(alpha, dtype=float))
