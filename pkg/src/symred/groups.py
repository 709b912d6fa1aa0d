"""Compact symmetry data acting linearly and symplectically: finite matrix
groups, tori given by weight matrices, and matrix Lie algebras in sp(2n).
Momentum maps, isotropy and orbit types live here too."""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
import scipy.linalg
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import hermite_normal_form, invariant_factors

from . import _linalg
from .errors import AmbiguityError, DimensionError, PreconditionError
from .poly import Poly, coordinate_names, poisson_bracket
from .symplin import SymplecticSpace, Subspace, kks_matrix, standard_omega_exact, subspace_gap

ExactMatrix = tuple[tuple[Fraction, ...], ...]

DEFAULT_ORDER_BOUND = 1024
ISOTROPY_TOL = 1e-9


def exact_matrix(M) -> ExactMatrix:
    """Convert nested numbers or strings like '1/2' to an exact matrix."""
    rows = np.asarray(M, dtype=object).tolist() if not isinstance(M, tuple) else M
    out = []
    for r in rows:
        out.append(tuple(Fraction(x) if not isinstance(x, float) else Fraction(x) for x in r))
    return tuple(out)


def identity(d: int) -> ExactMatrix:
    return tuple(tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d))


def _flat(M: ExactMatrix) -> tuple[Fraction, ...]:
    return tuple(x for r in M for x in r)


def _transpose(M: ExactMatrix) -> ExactMatrix:
    return tuple(zip(*M))


def is_symplectic_exact(M: ExactMatrix) -> bool:
    d = len(M)
    om = standard_omega_exact(d // 2)
    return _linalg.matmul_exact(_linalg.matmul_exact(_transpose(M), om), M) == om


def in_sp_exact(X: ExactMatrix) -> bool:
    d = len(X)
    om = standard_omega_exact(d // 2)
    a = _linalg.matmul_exact(_transpose(X), om)
    b = _linalg.matmul_exact(om, X)
    return all(a[i][j] + b[i][j] == 0 for i in range(d) for j in range(d))


def to_float(M) -> np.ndarray:
    return np.array([[float(x) for x in r] for r in M])


# --------------------------------------------------------------------------
# group descriptions


@dataclass(frozen=True)
class FiniteMatrixGroup:
    generators: tuple[ExactMatrix, ...]
    order_bound: int = DEFAULT_ORDER_BOUND

    def __post_init__(self):
        gens = tuple(exact_matrix(g) for g in self.generators)
        if not gens:
            raise PreconditionError("a finite group needs at least one generator (use the identity)")
        d = len(gens[0])
        for g in gens:
            if len(g) != d or any(len(r) != d for r in g) or d % 2:
                raise DimensionError("generators must be square matrices of one even size")
            if not is_symplectic_exact(g):
                raise PreconditionError(f"generator is not symplectic: {g}")
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return len(self.generators[0])


@dataclass(frozen=True)
class Torus:
    """Torus T^k acting on C^n with z_j -> exp(-i <a_j, theta>) z_j.

    ``weights`` is the k x n integer matrix whose column j is a_j.  The
    rotation direction is the one whose momentum map is +1/2 sum a_j |z_j|^2.
    """

    weights: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        W = tuple(tuple(int(x) for x in r) for r in self.weights)
        if not W or len({len(r) for r in W}) != 1 or not W[0]:
            raise DimensionError("weight matrix must be a non-empty k x n integer matrix")
        object.__setattr__(self, "weights", W)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def n(self) -> int:
        return len(self.weights[0])

    @property
    def dim(self) -> int:
        return 2 * self.n

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(r[j] for r in self.weights)


@dataclass(frozen=True)
class MatrixLieAlgebra:
    """Basis X_1..X_k of a subalgebra of sp(2n); C[a][b] = coordinates of [X_a, X_b]."""

    basis: tuple[ExactMatrix, ...]
    structure_constants: tuple | None = None

    def __post_init__(self):
        basis = tuple(exact_matrix(X) for X in self.basis)
        if not basis:
            raise PreconditionError("empty Lie algebra basis")
        d = len(basis[0])
        for X in basis:
            if len(X) != d or d % 2:
                raise DimensionError("basis matrices must share one even size")
            if not in_sp_exact(X):
                raise PreconditionError("basis element is not in sp(2n)")
        object.__setattr__(self, "basis", basis)
        if self.structure_constants is None:
            C = _compute_structure_constants(basis)
        else:
            C = tuple(tuple(tuple(Fraction(x) for x in c) for c in row) for row in self.structure_constants)
        _check_structure_constants(C)
        object.__setattr__(self, "structure_constants", C)

    @property
    def dim(self) -> int:
        return len(self.basis[0])

    @property
    def k(self) -> int:
        return len(self.basis)


GroupSpec = Union[FiniteMatrixGroup, Torus, MatrixLieAlgebra]


def _commutator(A: ExactMatrix, B: ExactMatrix) -> ExactMatrix:
    AB, BA = _linalg.matmul_exact(A, B), _linalg.matmul_exact(B, A)
    return tuple(tuple(x - y for x, y in zip(r1, r2)) for r1, r2 in zip(AB, BA))


def _compute_structure_constants(basis):
    k = len(basis)
    cols = [_flat(X) for X in basis]
    rows = [list(r) for r in zip(*cols)]
    C = []
    for a in range(k):
        row = []
        for b in range(k):
            target = _flat(_commutator(basis[a], basis[b]))
            sol = _linalg.solve_particular(rows, target, k)
            if sol is None:
                raise PreconditionError(f"[X_{a + 1}, X_{b + 1}] is not in the span of the basis")
            row.append(tuple(sol))
        C.append(tuple(row))
    return tuple(C)


def _check_structure_constants(C):
    k = len(C)
    for a in range(k):
        for b in range(k):
            if any(C[a][b][c] + C[b][a][c] != 0 for c in range(k)):
                raise PreconditionError("structure constants are not antisymmetric")
    for a, b, c in itertools.combinations(range(k), 3):
        for e in range(k):
            s = sum(
                (C[b][c][d] * C[a][d][e] + C[c][a][d] * C[b][d][e] + C[a][b][d] * C[c][d][e] for d in range(k)),
                Fraction(0),
            )
            if s != 0:
                raise PreconditionError("structure constants violate the Jacobi identity")


def spec_dim(spec: GroupSpec) -> int:
    return spec.dim


def torus_generator(weights_row: Sequence[int]) -> ExactMatrix:
    n = len(weights_row)
    d = 2 * n
    M = [[Fraction(0)] * d for _ in range(d)]
    for j, a in enumerate(weights_row):
        M[j][n + j] = Fraction(a)
        M[n + j][j] = Fraction(-a)
    return tuple(tuple(r) for r in M)


def lie_generators(spec: GroupSpec) -> tuple[ExactMatrix, ...]:
    """Infinitesimal generators X_a (empty for finite groups)."""
    if isinstance(spec, FiniteMatrixGroup):
        return ()
    if isinstance(spec, Torus):
        return tuple(torus_generator(r) for r in spec.weights)
    return spec.basis


def structure_constants(spec: GroupSpec) -> np.ndarray:
    if isinstance(spec, FiniteMatrixGroup):
        return np.zeros((0, 0, 0))
    if isinstance(spec, Torus):
        return np.zeros((spec.k,) * 3)
    return np.array([[[float(x) for x in c] for c in row] for row in spec.structure_constants])


def algebra_dim(spec: GroupSpec) -> int:
    return len(lie_generators(spec))


# --------------------------------------------------------------------------
# finite groups


@lru_cache(maxsize=64)
def close_group(spec: FiniteMatrixGroup) -> tuple[ExactMatrix, ...]:
    """All elements by product saturation, sorted lexicographically on flattened entries."""
    d = spec.dim
    seen = {identity(d)}
    frontier = [identity(d)]
    while frontier:
        nxt = []
        for h in frontier:
            for g in spec.generators:
                p = _linalg.matmul_exact(g, h)
                if p not in seen:
                    seen.add(p)
                    nxt.append(p)
                    if len(seen) > spec.order_bound:
                        raise PreconditionError(f"group order exceeds bound {spec.order_bound}")
        frontier = nxt
    return tuple(sorted(seen, key=_flat))


def _inverse(g: ExactMatrix) -> ExactMatrix:
    return _linalg.inverse_exact(g)


def _apply(g: ExactMatrix, v) -> tuple:
    return tuple(sum((a * x for a, x in zip(r, v)), Fraction(0)) for r in g)


def _subgroup_key(H) -> tuple:
    return tuple(sorted((_flat(h) for h in H)))


def conjugate(H, g: ExactMatrix) -> frozenset:
    gi = _inverse(g)
    return frozenset(_linalg.matmul_exact(_linalg.matmul_exact(g, h), gi) for h in H)


def canonical_subgroup(elements: tuple[ExactMatrix, ...], H) -> tuple:
    """Lexicographically least sorted element list among all conjugates of H."""
    return min(_subgroup_key(conjugate(H, g)) for g in elements)


def _generated(gens, d) -> frozenset:
    return frozenset(close_group(FiniteMatrixGroup(tuple(gens) or (identity(d),))))


@lru_cache(maxsize=16)
def all_subgroups(spec: FiniteMatrixGroup) -> tuple[frozenset, ...]:
    """Every subgroup, found by joining cyclic subgroups until saturation."""
    elements = close_group(spec)
    d = spec.dim
    subs = {frozenset([identity(d)])}
    for g in elements:
        subs.add(_generated([g], d))
    changed = True
    while changed:
        changed = False
        current = sorted(subs, key=_subgroup_key)
        for A, B in itertools.combinations(current, 2):
            if A <= B or B <= A:
                continue
            J = _generated(sorted(A | B, key=_flat), d)
            if J not in subs:
                subs.add(J)
                changed = True
    return tuple(sorted(subs, key=lambda H: (len(H), _subgroup_key(H))))


def subgroup_classes(spec: FiniteMatrixGroup) -> dict[tuple, frozenset]:
    """Conjugacy classes of subgroups: canonical identifier -> representative."""
    elements = close_group(spec)
    out: dict[tuple, frozenset] = {}
    for H in all_subgroups(spec):
        key = canonical_subgroup(elements, H)
        if key not in out:
            out[key] = frozenset(h for h in elements if _flat(h) in set(key))
    return dict(sorted(out.items(), key=lambda kv: (len(kv[1]), kv[0])))


def normalizer(spec: FiniteMatrixGroup, H) -> tuple[ExactMatrix, ...]:
    H = frozenset(H)
    return tuple(g for g in close_group(spec) if conjugate(H, g) == H)


def fixed_space_exact(H, d: int) -> Subspace:
    """V^H as an exact subspace."""
    rows = []
    for h in H:
        for i in range(d):
            rows.append([h[i][j] - int(i == j) for j in range(d)])
    ns = _linalg.nullspace(rows, d)
    B = np.empty((d, len(ns)), dtype=object)
    for c, vec in enumerate(ns):
        B[:, c] = vec
    return Subspace(d, B)


def pointwise_stabilizer(spec: FiniteMatrixGroup, V: Subspace) -> frozenset:
    cols = [tuple(Fraction(x) for x in V.basis[:, c]) for c in range(V.dim)]
    return frozenset(g for g in close_group(spec) if all(_apply(g, c) == c for c in cols))


# --------------------------------------------------------------------------
# torus lattices


def lattice_id(spec: Torus, support: Sequence[int]) -> tuple:
    """Hermite normal form of the weight columns on the support (canonical lattice id)."""
    support = sorted(support)
    if not support:
        return ()
    A = Matrix([[spec.weights[a][j] for j in support] for a in range(spec.k)])
    if A.is_zero_matrix:
        return ()
    H = hermite_normal_form(A)
    return tuple(tuple(int(x) for x in r) for r in H.tolist())


def lattice_rank(spec: Torus, support: Sequence[int]) -> int:
    support = sorted(support)
    if not support:
        return 0
    return Matrix([[spec.weights[a][j] for j in support] for a in range(spec.k)]).rank()


def lattice_invariant_factors(spec: Torus, support: Sequence[int]) -> tuple[int, ...]:
    """Invariant factors > 1 of the weight submatrix (finite part of the isotropy)."""
    support = sorted(support)
    if not support:
        return ()
    A = Matrix([[spec.weights[a][j] for j in support] for a in range(spec.k)])
    facs = invariant_factors(A, domain=ZZ)
    return tuple(int(abs(f)) for f in facs if abs(int(f)) > 1)


def in_lattice(spec: Torus, support: Sequence[int], j: int) -> bool:
    """Is the weight a_j in the integer span of {a_i : i in support}?"""
    base = lattice_id(spec, support)
    ext = lattice_id(spec, sorted(set(support) | {j}))
    return base == ext


def torus_fixed_coordinates(spec: Torus, support: Sequence[int]) -> tuple[int, ...]:
    """Coordinates z_j fixed by the isotropy subgroup of the given support."""
    return tuple(j for j in range(spec.n) if in_lattice(spec, support, j))


def coordinate_subspace(n: int, coords: Sequence[int]) -> Subspace:
    d = 2 * n
    cols = [j for j in coords] + [n + j for j in coords]
    B = np.zeros((d, len(cols)))
    for c, i in enumerate(sorted(cols)):
        B[i, c] = 1.0
    return Subspace(d, B)


def torus_support(spec: Torus, v, tol: float = ISOTROPY_TOL) -> tuple[int, ...]:
    v = np.asarray(v, dtype=float)
    n = spec.n
    mod = np.hypot(v[:n], v[n:])
    amb = (mod >= 0.1 * tol) & (mod <= 10 * tol)
    if np.any(amb):
        raise AmbiguityError(f"|z_j| within tolerance band of {tol:g}: {mod[amb]}")
    return tuple(int(j) for j in np.nonzero(mod > tol)[0])


def torus_element(spec: Torus, theta) -> np.ndarray:
    X = sum(float(t) * to_float(G) for t, G in zip(theta, lie_generators(spec)))
    return scipy.linalg.expm(X)


# --------------------------------------------------------------------------
# momentum maps


@dataclass(frozen=True, eq=False)
class MomentumMap:
    """F_a(v) = 1/2 omega(X_a v, v), one quadratic per algebra basis element."""

    components: tuple[Poly, ...]
    gens: tuple[str, ...]
    quad: np.ndarray = field(repr=False)  # (k, 2n, 2n) with F_a = 1/2 v^T Q_a v

    @property
    def algebra_dim(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return len(self.gens)

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if not self.components:
            return np.zeros(v.shape[:-1] + (0,))
        return 0.5 * np.einsum("...i,aij,...j->...a", v, self.quad, v)

    def jacobian(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if not self.components:
            return np.zeros((0, self.dim))
        return np.einsum("aij,j->ai", self.quad, v)

    def norm_squared(self) -> Poly:
        """sum_a F_a^2 (an invariant polynomial when the basis is orthonormal for an invariant product)."""
        out = Poly.zero(self.gens)
        for f in self.components:
            out = out + f * f
        return out


def momentum_map(spec: GroupSpec, S: SymplecticSpace | None = None) -> MomentumMap:
    d = spec.dim
    if S is not None:
        if S.dim != d:
            raise DimensionError("group and space dimensions differ")
        if not S.is_standard():
            raise PreconditionError("momentum polynomials require the standard form")
    gens = coordinate_names(d // 2)
    om = standard_omega_exact(d // 2)
    comps, quads = [], []
    for X in lie_generators(spec):
        if not in_sp_exact(X):
            raise PreconditionError("generator is not in sp(2n)")
        Q = _linalg.matmul_exact(_transpose(X), om)  # symmetric for X in sp
        comps.append(Poly.quadratic_form(gens, Q) * Fraction(1, 2))
        quads.append(to_float(Q))
    quad = np.array(quads) if quads else np.zeros((0, d, d))
    return MomentumMap(components=tuple(comps), gens=gens, quad=quad)


def check_equivariance(F: MomentumMap, spec: GroupSpec) -> list[list[Poly]]:
    """Table of {F_a, F_b} - sum_c C^c_ab F_c; all entries vanish for an equivariant F."""
    k = F.algebra_dim
    if isinstance(spec, MatrixLieAlgebra):
        C = spec.structure_constants
    else:
        C = tuple(tuple(tuple(Fraction(0) for _ in range(k)) for _ in range(k)) for _ in range(k))
    table = []
    for a in range(k):
        row = []
        for b in range(k):
            r = poisson_bracket(F.components[a], F.components[b])
            for c in range(k):
                if C[a][b][c]:
                    r = r - F.components[c] * C[a][b][c]
            row.append(r)
        table.append(row)
    return table


def orbit_null_check(spec: GroupSpec, S: SymplecticSpace, x) -> float:
    """Gap between ker(omega|T) for T = {X(xi) x} and {X(xi) x : xi in g_alpha}, alpha = F(x)."""
    x = np.asarray(x, dtype=float)
    Xs = [to_float(X) for X in lie_generators(spec)]
    if not Xs:
        return 0.0
    T = np.column_stack([X @ x for X in Xs])
    G = T.T @ S.omega @ T
    F = momentum_map(spec, S)
    K = kks_matrix(structure_constants(spec), F(x))
    floor = 1e-10 * max(1.0, float(x @ x))
    ker_form = _linalg.null_basis(G) if np.abs(G).max() > floor else np.eye(len(Xs))
    ker_kks = _linalg.null_basis(K) if np.abs(K).max() > floor else np.eye(len(Xs))
    U = Subspace.span((T @ ker_form).T, S.dim)
    V = Subspace.span((T @ ker_kks).T, S.dim)
    return subspace_gap(U, V)


# --------------------------------------------------------------------------
# isotropy and orbit types


@dataclass(frozen=True)
class FiniteIsotropy:
    elements: frozenset

    @property
    def order(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class TorusIsotropy:
    support: tuple[int, ...]
    lattice: tuple
    invariant_factors: tuple[int, ...]
    dim: int


@dataclass(frozen=True, eq=False)
class AlgebraIsotropy:
    subalgebra: Subspace

    @property
    def dim(self) -> int:
        return self.subalgebra.dim


def _finite_fixes(g: ExactMatrix, v, tol: float) -> bool:
    if all(isinstance(x, (int, Fraction)) for x in v):
        return _apply(g, v) == tuple(Fraction(x) for x in v)
    gv = to_float(g) @ np.asarray(v, dtype=float)
    err = float(np.max(np.abs(gv - np.asarray(v, dtype=float))))
    if 0.1 * tol <= err <= 10 * tol:
        raise AmbiguityError(f"|g v - v| = {err:.3e} within tolerance band of {tol:g}")
    return err < 0.1 * tol


def isotropy(spec: GroupSpec, v, tol: float = ISOTROPY_TOL):
    if len(v) != spec.dim:
        raise DimensionError(f"point has {len(v)} coordinates, group acts on R^{spec.dim}")
    if isinstance(spec, FiniteMatrixGroup):
        return FiniteIsotropy(frozenset(g for g in close_group(spec) if _finite_fixes(g, v, tol)))
    if isinstance(spec, Torus):
        S = torus_support(spec, v, tol)
        r = lattice_rank(spec, S)
        return TorusIsotropy(S, lattice_id(spec, S), lattice_invariant_factors(spec, S), spec.k - r)
    vf = np.asarray(v, dtype=float)
    Xs = [to_float(X) for X in spec.basis]
    M = np.column_stack([X @ vf for X in Xs])
    return AlgebraIsotropy(Subspace(spec.k, _linalg.null_basis(M, atol=tol)))


def orbit_type(spec: GroupSpec, v, tol: float = ISOTROPY_TOL) -> tuple:
    """Canonical, hashable identifier of the conjugacy class of the isotropy group."""
    iso = isotropy(spec, v, tol)
    if isinstance(spec, FiniteMatrixGroup):
        return ("finite", canonical_subgroup(close_group(spec), iso.elements))
    if isinstance(spec, Torus):
        return ("torus", iso.lattice, iso.invariant_factors)
    return ("algebra", iso.dim)


def class_label(ident: tuple) -> str:
    """Short human-readable label for an orbit-type identifier."""
    kind = ident[0]
    if kind == "finite":
        order = len(ident[1])
        digest = hashlib.sha1(repr(ident).encode()).hexdigest()[:6]
        return f"order{order}-{digest}"
    if kind == "torus":
        digest = hashlib.sha1(repr(ident).encode()).hexdigest()[:6]
        return f"lattice{ident[1]}-{digest}" if ident[1] else "full-torus"
    return f"algebra-dim{ident[1]}"


def fixed_subspace(spec: GroupSpec, v, tol: float = ISOTROPY_TOL) -> Subspace:
    """V^H for H the isotropy group of v."""
    iso = isotropy(spec, v, tol)
    d = spec.dim
    if isinstance(spec, FiniteMatrixGroup):
        return fixed_space_exact(iso.elements, d)
    if isinstance(spec, Torus):
        return coordinate_subspace(spec.n, torus_fixed_coordinates(spec, iso.support))
    if iso.dim == 0:
        return Subspace(d, np.eye(d))
    Xs = [to_float(X) for X in spec.basis]
    stacked = np.vstack([sum(c * X for c, X in zip(xi, Xs)) for xi in iso.subalgebra.basis.T])
    return Subspace(d, _linalg.null_basis(stacked, atol=1e-10))


def normalizer_algebra(spec: MatrixLieAlgebra, h: Subspace) -> Subspace:
    """n(h) = {xi : [xi, h] in h}."""
    k = spec.k
    C = structure_constants(spec)
    if h.dim == 0 or h.dim == k:
        return Subspace(k, np.eye(k))
    P = np.eye(k) - h.projector()
    rows = []
    for eta in h.basis.T:
        # xi -> [xi, eta] projected away from h
        ad = np.einsum("abc,b->ca", C, eta)
        rows.append(P @ ad)
    return Subspace(k, _linalg.null_basis(np.vstack(rows)))


def group_element_matrices(spec: GroupSpec, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Sample group elements as float matrices (all elements for finite groups)."""
    if isinstance(spec, FiniteMatrixGroup):
        return [to_float(g) for g in close_group(spec)]
    Xs = [to_float(X) for X in lie_generators(spec)]
    out = []
    for _ in range(count):
        coeffs = rng.normal(size=len(Xs)) * (np.pi if isinstance(spec, Torus) else 1.0)
        out.append(scipy.linalg.expm(sum(c * X for c, X in zip(coeffs, Xs))))
    return out
