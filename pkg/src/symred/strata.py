"""Orbit-type stratification of the zero level F^{-1}(0)/K.

Finite groups and tori are classified exactly (subgroup conjugacy classes,
support patterns of the weight matrix).  Matrix Lie algebras are handled by
sampling and carry isotropy dimensions only.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from sympy import Matrix

from . import _linalg
from .errors import AmbiguityError, PreconditionError
from .groups import (
    FiniteMatrixGroup,
    GroupSpec,
    MatrixLieAlgebra,
    MomentumMap,
    Torus,
    class_label,
    canonical_subgroup,
    close_group,
    conjugate,
    coordinate_subspace,
    fixed_space_exact,
    fixed_subspace,
    isotropy,
    lattice_id,
    lattice_invariant_factors,
    lattice_rank,
    lie_generators,
    momentum_map,
    normalizer,
    orbit_type,
    pointwise_stabilizer,
    structure_constants,
    to_float,
    torus_fixed_coordinates,
    _apply,
    _flat,
)
from .symplin import (
    ConstantRankData,
    SymplecticSpace,
    Subspace,
    adapted_complex_structure,
    constant_rank_split,
    darboux_basis,
    standard_omega,
)

ZERO_LEVEL_TOL = 1e-12
BASE_POINT_TOL = 1e-10


# --------------------------------------------------------------------------
# sampling the zero level


@dataclass
class ZeroLevelSample:
    points: np.ndarray
    requested: int
    discarded: int
    max_residual: float

    @property
    def shortfall(self) -> int:
        return self.requested - len(self.points)


def _quad_eval(quad: np.ndarray, V: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("ni,aij,nj->na", V, quad, V)


def _newton_project(quad: np.ndarray, V: np.ndarray, max_iter: int = 100, tol: float = ZERO_LEVEL_TOL):
    """Minimum-norm Gauss-Newton steps towards F = 0 for a batch of points."""
    V = np.array(V, dtype=float)
    if quad.shape[0] == 0:
        return V, np.ones(len(V), dtype=bool)
    done = np.zeros(len(V), dtype=bool)
    for _ in range(max_iter):
        R = _quad_eval(quad, V)
        res = np.linalg.norm(R, axis=1)
        done = res <= tol * np.minimum(1.0, np.einsum("ni,ni->n", V, V))
        if done.all():
            break
        act = ~done
        Jb = np.einsum("aij,nj->nai", quad, V[act])
        step = np.einsum("nia,na->ni", np.linalg.pinv(Jb, rcond=1e-12), R[act])
        V[act] = V[act] - step
    res = np.linalg.norm(_quad_eval(quad, V), axis=1)
    return V, res <= tol * np.maximum(np.minimum(1.0, np.einsum("ni,ni->n", V, V)), 1e-300)


def zero_level_sampler(
    F: MomentumMap,
    count: int,
    radius: float = 1.0,
    seed: int = 0,
    max_iter: int = 100,
    center=None,
) -> ZeroLevelSample:
    """Deterministic pseudo-random points of F^{-1}(0) with |v| <= radius.

    Without ``center`` the converged points are rescaled to a random radius
    (F is homogeneous, so the zero level is a cone).  With ``center`` the
    points are projected from a ball around it and not rescaled.
    """
    quad = np.asarray(F.quad, dtype=float)
    d = quad.shape[1] if quad.ndim == 3 and quad.shape[0] else F.dim
    rng = np.random.default_rng(seed)
    out: list[np.ndarray] = []
    discarded = 0
    attempts = 0
    while len(out) < count and attempts < 20:
        attempts += 1
        m = max(count - len(out), 1) * 2
        g = rng.normal(size=(m, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = radius * rng.random(m) ** (1.0 / d)
        V0 = g * rad[:, None]
        if center is not None:
            V0 = V0 + np.asarray(center, dtype=float)
        V, ok = _newton_project(quad, V0, max_iter)
        for v, good, r in zip(V, ok, rad):
            if len(out) >= count:
                break
            nv = np.linalg.norm(v)
            if not good or nv < 1e-8:
                discarded += 1
                continue
            if center is None:
                v = v * (r / nv)
            if quad.shape[0] and np.linalg.norm(_quad_eval(quad, v[None])[0]) > ZERO_LEVEL_TOL:
                discarded += 1
                continue
            out.append(v)
    pts = np.array(out).reshape(-1, d)
    resid = float(np.max(np.linalg.norm(_quad_eval(quad, pts), axis=1))) if len(pts) and quad.shape[0] else 0.0
    return ZeroLevelSample(pts, count, discarded, resid)


# --------------------------------------------------------------------------
# dimension formula through fixed spaces


def _float_gens(spec: GroupSpec) -> list[np.ndarray]:
    return [to_float(X) for X in lie_generators(spec)]


def _normalizer_basis(C: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Columns spanning {xi : [xi, h] subset h} for h given by orthonormal columns."""
    k = C.shape[0]
    if h.shape[1] in (0, k):
        return np.eye(k)
    P = np.eye(k) - h @ h.T
    rows = [P @ np.einsum("abc,b->ca", C, eta) for eta in h.T]
    return _linalg.null_basis(np.vstack(rows))


def generic_stratum_dim(gens: Sequence[np.ndarray], C: np.ndarray, quad: np.ndarray, x, V: Subspace | None = None) -> int:
    """dim(V^H ∩ ker dF_x) - dim(orbit of n(h)/h through x).

    ``V`` overrides the fixed space of the identity component (used when
    the isotropy has a finite part).
    """
    x = np.asarray(x, dtype=float)
    d = len(x)
    k = len(gens)
    scale = max(1.0, float(np.linalg.norm(x)))
    if k == 0:
        return d if V is None else V.dim
    tol = 1e-10 * scale
    M = np.column_stack([X @ x for X in gens])
    h = _linalg.null_basis(M, atol=tol)
    if V is None:
        if h.shape[1] == 0:
            V = Subspace(d, np.eye(d))
        else:
            stacked = np.vstack([sum(c * X for c, X in zip(xi, gens)) for xi in h.T])
            V = Subspace(d, _linalg.null_basis(stacked, atol=1e-10))
    if V.dim == 0:
        return 0
    B = V.orthonormal()
    jac = np.einsum("aij,j->ai", quad, x) @ B
    r = _linalg.numerical_rank(jac, atol=tol)
    n_alg = _normalizer_basis(C, h)
    orb = np.column_stack([sum(c * X for c, X in zip(xi, gens)) @ x for xi in n_alg.T])
    o = _linalg.numerical_rank(orb, atol=tol)
    return V.dim - r - o


def sampled_stratum_dim(spec: GroupSpec, x) -> int:
    """Dimension of the reduced stratum through x from the fixed-space formula."""
    if isinstance(spec, FiniteMatrixGroup):
        return fixed_subspace(spec, x).dim
    F = momentum_map(spec)
    V = fixed_subspace(spec, x) if isinstance(spec, Torus) else None
    return generic_stratum_dim(_float_gens(spec), structure_constants(spec), F.quad, x, V)


# --------------------------------------------------------------------------
# descriptors


@dataclass(eq=False)
class StratumDescriptor:
    isotropy_class: tuple
    label: str
    fixed_space: Subspace
    stratum_dim: int
    representative: np.ndarray
    closure_neighbors: list = field(default_factory=list)
    subgroup: frozenset | None = None
    patterns: tuple = ()
    isotropy_dim: int = 0
    slice_dim: int | None = None
    slice_rep: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "class": self.label,
            "stratum_dim": self.stratum_dim,
            "fixed_space_dim": self.fixed_space.dim,
            "isotropy_dim": self.isotropy_dim,
            "representative": [float(x) for x in self.representative],
            "closure_of": [class_label(c) for c in self.closure_neighbors],
            "slice_dim": self.slice_dim,
            "slice_rep": self.slice_rep,
        }


@dataclass(eq=False)
class Stratification:
    spec: GroupSpec
    strata: list[StratumDescriptor]
    candidate_classes: list[tuple]
    exact: bool

    def by_class(self, ident) -> StratumDescriptor:
        for s in self.strata:
            if s.isotropy_class == ident:
                return s
        raise KeyError(ident)

    def dims(self) -> list[int]:
        return sorted(s.stratum_dim for s in self.strata)

    def closure_pairs(self) -> set[tuple]:
        """(lower, upper): the lower stratum lies in the closure of the upper one."""
        return {(s.isotropy_class, c) for s in self.strata for c in s.closure_neighbors}

    def hasse(self) -> list[tuple[str, str]]:
        pairs = self.closure_pairs()
        edges = []
        for lo, up in sorted(pairs, key=repr):
            if not any((lo, mid) in pairs and (mid, up) in pairs for mid in {p[1] for p in pairs}):
                edges.append((class_label(lo), class_label(up)))
        return edges

    def is_partial_order(self) -> bool:
        pairs = self.closure_pairs()
        if any((b, a) in pairs for a, b in pairs):
            return False
        return all((a, c) in pairs for a, b in pairs for b2, c in pairs if b == b2)

    def to_json(self) -> dict:
        return {
            "strata": [s.to_json() for s in self.strata],
            "candidate_classes": len(self.candidate_classes),
            "realized_classes": len(self.strata),
            "hasse": [list(e) for e in self.hasse()],
            "exact": self.exact,
        }


def _finite_representative(spec: FiniteMatrixGroup, H: frozenset, V: Subspace, seed: int = 0):
    """A rational point of V^H whose stabilizer is exactly H."""
    d = spec.dim
    if V.dim == 0:
        return tuple(Fraction(0) for _ in range(d))
    rng = np.random.default_rng(seed)
    for _ in range(200):
        c = [Fraction(int(rng.integers(1, 13)), int(rng.integers(1, 7))) * (1 if rng.random() < 0.5 else -1) for _ in range(V.dim)]
        v = tuple(sum((V.basis[i, j] * c[j] for j in range(V.dim)), Fraction(0)) for i in range(d))
        if isotropy(spec, v).elements == H:
            return v
    raise PreconditionError("could not find a point with the requested stabilizer")


def _enumerate_finite(spec: FiniteMatrixGroup) -> Stratification:
    d = spec.dim
    elements = close_group(spec)
    classes = []
    strata = []
    for key, H in _finite_classes(spec).items():
        ident = ("finite", key)
        classes.append(ident)
        V = fixed_space_exact(H, d)
        if pointwise_stabilizer(spec, V) != H:
            continue
        rep = _finite_representative(spec, H, V)
        strata.append(
            StratumDescriptor(
                isotropy_class=ident,
                label=class_label(ident),
                fixed_space=V,
                stratum_dim=V.dim,
                representative=np.array([float(x) for x in rep]),
                subgroup=H,
                isotropy_dim=0,
                slice_dim=d,
                slice_rep={"group_order": len(H)},
            )
        )
    # closure: stratum (H) sits in the closure of (H') iff a conjugate of H' lies in H
    for s in strata:
        for t in strata:
            if s is t or len(t.subgroup) >= len(s.subgroup):
                continue
            for g in elements:
                Hc = conjugate(t.subgroup, g)
                if Hc <= s.subgroup:
                    # combinatorial certificate: V^H inside the fixed space of the conjugate
                    Vc = fixed_space_exact(Hc, d)
                    rows = [list(Vc.basis[:, j]) for j in range(Vc.dim)]
                    ext = rows + [list(s.fixed_space.basis[:, j]) for j in range(s.fixed_space.dim)]
                    if _linalg.rank(ext, d) == Vc.dim:
                        s.closure_neighbors.append(t.isotropy_class)
                    break
    return Stratification(spec, strata, classes, exact=True)


def _finite_classes(spec: FiniteMatrixGroup) -> dict:
    from .groups import subgroup_classes

    return subgroup_classes(spec)


def torus_pattern_feasible(spec: Torus, support: Sequence[int]):
    """A vector r > 0 on the support with A_S r = 0 (so |z_j|^2 = r_j lies on F = 0), or None."""
    support = sorted(support)
    if not support:
        return np.zeros(0)
    A = np.array([[spec.weights[a][j] for j in support] for a in range(spec.k)], dtype=float)
    if not A.any():
        return np.ones(len(support))
    res = linprog(np.zeros(len(support)), A_eq=A, b_eq=np.zeros(spec.k), bounds=[(1, None)] * len(support), method="highs")
    if res.status != 0:
        return None
    r = np.asarray(res.x, dtype=float)
    return r / r.max()


def _torus_point(spec: Torus, support: Sequence[int], r) -> np.ndarray:
    v = np.zeros(spec.dim)
    for j, rj in zip(sorted(support), r):
        v[j] = np.sqrt(rj)
    return v


def torus_patterns(spec: Torus) -> list[dict]:
    """All support patterns realized on F^{-1}(0), with class and dimension."""
    out = []
    for size in range(spec.n + 1):
        for S in itertools.combinations(range(spec.n), size):
            r = torus_pattern_feasible(spec, S)
            if r is None:
                continue
            rank = lattice_rank(spec, S)
            ident = ("torus", lattice_id(spec, S), lattice_invariant_factors(spec, S))
            out.append({"support": S, "r": r, "class": ident, "dim": 2 * (len(S) - rank), "rank": rank})
    return out


def _enumerate_torus(spec: Torus) -> Stratification:
    pats = torus_patterns(spec)
    by_class: dict[tuple, list] = {}
    for p in pats:
        by_class.setdefault(p["class"], []).append(p)
    strata = []
    for ident, ps in by_class.items():
        best = max(ps, key=lambda p: (p["dim"], -len(p["support"])))
        S = best["support"]
        V = coordinate_subspace(spec.n, torus_fixed_coordinates(spec, S))
        strata.append(
            StratumDescriptor(
                isotropy_class=ident,
                label=class_label(ident),
                fixed_space=V,
                stratum_dim=best["dim"],
                representative=_torus_point(spec, S, best["r"]),
                patterns=tuple(p["support"] for p in ps),
                isotropy_dim=spec.k - best["rank"],
            )
        )
    strata.sort(key=lambda s: (-s.isotropy_dim, s.stratum_dim, repr(s.isotropy_class)))
    for s in strata:
        fixed_s = set(torus_fixed_coordinates(spec, s.patterns[0]))
        for t in strata:
            if s is t:
                continue
            if any(set(a) < set(b) for a in s.patterns for b in t.patterns):
                fixed_t = set(torus_fixed_coordinates(spec, t.patterns[0]))
                if fixed_s <= fixed_t:
                    s.closure_neighbors.append(t.isotropy_class)
    return Stratification(spec, strata, sorted({p["class"] for p in pats}, key=repr), exact=True)


def _enumerate_algebra(spec: MatrixLieAlgebra, samples: int, seed: int) -> Stratification:
    F = momentum_map(spec)
    pts = zero_level_sampler(F, samples, 1.0, seed).points
    pts = np.vstack([np.zeros(spec.dim), pts])
    found: dict[tuple, tuple[int, np.ndarray]] = {}
    for v in pts:
        ident = orbit_type(spec, v)
        dim = sampled_stratum_dim(spec, v)
        if ident not in found or dim > found[ident][0]:
            found[ident] = (dim, v)
    strata = []
    for ident, (dim, v) in sorted(found.items(), key=lambda kv: -kv[0][1]):
        strata.append(
            StratumDescriptor(
                isotropy_class=ident,
                label=class_label(ident),
                fixed_space=fixed_subspace(spec, v),
                stratum_dim=dim,
                representative=v,
                isotropy_dim=ident[1],
            )
        )
    # sampled closure: a larger isotropy algebra occurs at limits of smaller ones
    for s in strata:
        near = zero_level_sampler(F, 10, 1e-3 * max(1.0, np.linalg.norm(s.representative)), seed + 1, center=s.representative)
        seen = {orbit_type(spec, v) for v in near.points}
        for t in strata:
            if t is not s and t.isotropy_class in seen and t.isotropy_dim < s.isotropy_dim:
                s.closure_neighbors.append(t.isotropy_class)
    return Stratification(spec, strata, list(found), exact=False)


def enumerate_strata(spec: GroupSpec, S: SymplecticSpace | None = None, F: MomentumMap | None = None,
                     samples: int = 64, seed: int = 0, with_slices: bool = True) -> Stratification:
    """Isotropy classes realized on F^{-1}(0) with fixed spaces, dimensions and closure order."""
    if isinstance(spec, FiniteMatrixGroup):
        strat = _enumerate_finite(spec)
    elif isinstance(spec, Torus):
        strat = _enumerate_torus(spec)
    else:
        strat = _enumerate_algebra(spec, samples, seed)
    if with_slices:
        for s in strat.strata:
            try:
                sm = slice_model(s.representative, spec)
            except AmbiguityError:
                continue
            s.slice_dim = sm.W.dim
            s.slice_rep = sm.rep_json()
    return strat


# --------------------------------------------------------------------------
# slice models


@dataclass(eq=False)
class SliceModel:
    base_point: np.ndarray
    isotropy_class: tuple
    W: Subspace
    basis: np.ndarray  # Darboux basis of W, columns (e_1..e_m, f_1..f_m)
    split: ConstantRankData | None
    generators: list[np.ndarray]  # isotropy algebra generators restricted to W (Darboux coords)
    structure: np.ndarray  # structure constants of the isotropy algebra
    quad: np.ndarray  # F_W components: F_b(w) = 1/2 w^T quad_b w
    finite_group: FiniteMatrixGroup | None = None
    torus: Torus | None = None
    abelian: bool = True
    finite_part: tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return self.W.dim

    def momentum(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if self.quad.shape[0] == 0:
            return np.zeros(w.shape[:-1] + (0,))
        return 0.5 * np.einsum("...i,aij,...j->...a", w, self.quad, w)

    def lift(self, w) -> np.ndarray:
        return self.base_point + self.basis @ np.asarray(w, dtype=float)

    def rep_json(self) -> dict:
        out = {"dim": self.dim, "algebra_dim": len(self.generators), "abelian": self.abelian}
        if self.torus is not None:
            out["weights"] = [list(r) for r in self.torus.weights]
        if self.finite_group is not None:
            out["group_order"] = len(close_group(self.finite_group))
        if self.finite_part:
            out["finite_part"] = list(self.finite_part)
        return out


class _SliceMomentum:
    """Duck-typed stand-in for MomentumMap on a slice."""

    def __init__(self, quad: np.ndarray, dim: int):
        self.quad = quad
        self.dim = dim

    @property
    def algebra_dim(self) -> int:
        return self.quad.shape[0]


def _integer_kernel(A: np.ndarray) -> list[tuple[int, ...]]:
    """Primitive integer vectors spanning {theta : A theta = 0}."""
    k = A.shape[1]
    if A.shape[0] == 0 or not A.any():
        return [tuple(int(i == j) for j in range(k)) for i in range(k)]
    out = []
    for v in Matrix(A.astype(int).tolist()).nullspace():
        den = 1
        for x in v:
            den = den * x.q // np.gcd(den, x.q)
        ints = [int(x * den) for x in v]
        g = 0
        for x in ints:
            g = int(np.gcd(g, abs(x)))
        ints = [x // g for x in ints]
        if next(x for x in ints if x) < 0:
            ints = [-x for x in ints]
        out.append(tuple(ints))
    return out


def _torus_slice(spec: Torus, W: Subspace, support) -> tuple[np.ndarray, Torus | None, list[tuple[int, ...]]]:
    """Darboux basis of W diagonalizing the isotropy torus, with integer weights."""
    n = spec.n
    A = np.array(spec.weights, dtype=float)
    AS = A[:, list(support)].T if support else np.zeros((0, spec.k))
    hbasis = _integer_kernel(AS)
    Bw = W.orthonormal()
    Z = Bw[:n] + 1j * Bw[n:]
    u, s, _ = np.linalg.svd(Z, full_matrices=False)
    m = W.dim // 2
    U = u[:, :m]
    if not hbasis:
        E = U
    else:
        coeffs = np.sqrt(np.arange(2, len(hbasis) + 2, dtype=float))
        d = sum(c * (A.T @ np.array(th, dtype=float)) for c, th in zip(coeffs, hbasis))
        K = U.conj().T @ np.diag(d) @ U
        K = 0.5 * (K + K.conj().T)
        _, evecs = np.linalg.eigh(K)
        E = U @ evecs
    weights = []
    for th in hbasis:
        dth = A.T @ np.array(th, dtype=float)
        row = []
        for l in range(m):
            w = float(np.real(E[:, l].conj() @ (dth * E[:, l])))
            if abs(w - round(w)) > 1e-8:
                raise AmbiguityError(f"slice weight {w} is not an integer")
            row.append(int(round(w)))
        weights.append(tuple(row))
    e = np.vstack([E.real, E.imag])
    f = np.vstack([-E.imag, E.real])
    basis = np.hstack([e, f])
    torus = Torus(tuple(weights)) if weights and m else None
    return basis, torus, hbasis


def slice_model(x, spec: GroupSpec, S: SymplecticSpace | None = None) -> SliceModel:
    """Symplectic slice at a point of the zero level with the isotropy action restricted to it."""
    x = np.asarray(x, dtype=float)
    d = spec.dim
    S = S or SymplecticSpace.standard(d // 2)
    F = momentum_map(spec)
    if F.algebra_dim and np.linalg.norm(F(x)) > BASE_POINT_TOL * max(1.0, float(x @ x)):
        raise PreconditionError(f"base point is not on the zero level (|F| = {np.linalg.norm(F(x)):.3e})")
    ident = orbit_type(spec, x)
    if isinstance(spec, FiniteMatrixGroup):
        H = isotropy(spec, x).elements
        sub = FiniteMatrixGroup(tuple(sorted(H, key=_flat)))
        return SliceModel(
            base_point=x, isotropy_class=ident, W=Subspace(d, np.eye(d)), basis=np.eye(d), split=None,
            generators=[], structure=np.zeros((0, 0, 0)), quad=np.zeros((0, d, d)), finite_group=sub,
        )
    gens = _float_gens(spec)
    for X in gens:
        if not np.allclose(X, -X.T, atol=1e-12):
            raise PreconditionError("slice construction needs generators orthogonal for the standard metric")
    T = Subspace.span([X @ x for X in gens], d) if np.abs(x).max() > 0 else Subspace.zero(d)
    J = adapted_complex_structure(S, np.eye(d))
    split = constant_rank_split(T, S, J)
    W = split.N
    om_w = standard_omega(W.dim // 2) if W.dim else np.zeros((0, 0))
    if isinstance(spec, Torus):
        iso = isotropy(spec, x)
        basis, torus, hbasis = _torus_slice(spec, W, iso.support)
        hgens = [sum(c * X for c, X in zip(th, gens)) for th in hbasis]
        C = np.zeros((len(hbasis),) * 3)
        finite_part = iso.invariant_factors
        abelian = True
    else:
        iso = isotropy(spec, x)
        h = iso.subalgebra.orthonormal()
        hgens = [sum(c * X for c, X in zip(xi, gens)) for xi in h.T]
        basis = darboux_basis(W.basis, S.omega) if W.dim else np.zeros((d, 0))
        Cfull = structure_constants(spec)
        # structure constants of h in its orthonormal basis
        C = np.einsum("ai,bj,abc,ck->ijk", h, h, Cfull, h) if h.shape[1] else np.zeros((0, 0, 0))
        torus = None
        finite_part = ()
        abelian = bool(np.abs(C).max() < 1e-10) if C.size else True
    # restriction to W in Darboux coordinates: M = Omega_W^{-1} B^T Omega X B
    left = -om_w @ basis.T @ S.omega if W.dim else np.zeros((0, d))
    restricted = [left @ X @ basis for X in hgens]
    quad = np.array([M.T @ om_w for M in restricted]) if restricted and W.dim else np.zeros((len(restricted), W.dim, W.dim))
    return SliceModel(
        base_point=x, isotropy_class=ident, W=W, basis=basis, split=split, generators=restricted,
        structure=C, quad=quad, torus=torus, abelian=abelian, finite_part=tuple(finite_part),
    )


def slice_invariants(sm: SliceModel, S: SymplecticSpace | None = None) -> dict[str, float]:
    """Residuals for: omega nondegenerate on W, W invariant under the isotropy, F_W(0) = 0."""
    d = sm.base_point.shape[0]
    S = S or SymplecticSpace.standard(d // 2)
    m = sm.W.dim
    out = {"W_dim": m}
    if m:
        G = sm.basis.T @ S.omega @ sm.basis
        out["darboux_residual"] = float(np.abs(G - standard_omega(m // 2)).max())
        out["nondegenerate"] = bool(_linalg.numerical_rank(G) == m)
    else:
        out["darboux_residual"] = 0.0
        out["nondegenerate"] = True
    P = np.eye(d) - sm.W.projector()
    esc = 0.0
    if sm.finite_group is not None:
        for g in close_group(sm.finite_group):
            esc = max(esc, float(np.abs(P @ to_float(g) @ sm.W.basis).max()) if m else 0.0)
    out["invariance_residual"] = esc
    out["F_W_at_0"] = float(np.abs(sm.momentum(np.zeros(m))).max()) if sm.quad.shape[0] else 0.0
    return out


# --------------------------------------------------------------------------
# local model comparison


@dataclass
class LocalModelReport:
    base_point: list
    slice_pairs: list
    ambient_pairs: list
    match: bool
    partial: bool
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "base_point": self.base_point,
            "slice_pairs": self.slice_pairs,
            "ambient_pairs": self.ambient_pairs,
            "match": self.match,
            "partial": self.partial,
            "notes": self.notes,
        }


def _project_to_zero(spec: GroupSpec, y: np.ndarray) -> np.ndarray:
    F = momentum_map(spec)
    if F.algebra_dim == 0:
        return y
    V, ok = _newton_project(F.quad, y[None, :], tol=1e-14)
    if not ok[0]:
        V, ok = _newton_project(F.quad, y[None, :], tol=ZERO_LEVEL_TOL)
        if not ok[0]:
            raise PreconditionError("lifted slice point did not project onto the zero level")
    return V[0]


def _slice_strata_torus(sm: SliceModel, spec: Torus, eps: float) -> list[tuple]:
    """(ambient class, dim) for each isotropy class of the slice reduction at 0."""
    m = sm.W.dim // 2
    if sm.torus is None:
        w = np.concatenate([np.ones(m), np.zeros(m)]) / max(1.0, np.sqrt(m)) if m else np.zeros(0)
        y = _project_to_zero(spec, sm.lift(eps * w))
        return [(orbit_type(spec, y), sm.W.dim)]
    best: dict[tuple, tuple[int, tuple]] = {}
    for p in torus_patterns(sm.torus):
        w = np.zeros(2 * m)
        for j, rj in zip(p["support"], p["r"]):
            w[j] = np.sqrt(rj)
        y = _project_to_zero(spec, sm.lift(eps * w))
        amb = orbit_type(spec, y)
        key = p["class"]
        if key not in best or p["dim"] > best[key][0]:
            best[key] = (p["dim"], amb)
    return [(amb, dim) for dim, amb in best.values()]


def _ambient_torus_pairs(spec: Torus, x) -> list[tuple]:
    from .groups import torus_support

    Sx = set(torus_support(spec, x))
    best: dict[tuple, int] = {}
    for p in torus_patterns(spec):
        if Sx <= set(p["support"]):
            best[p["class"]] = max(best.get(p["class"], -1), p["dim"])
    return list(best.items())


def _generic_classes(gens, C, quad, dim, points, tol=1e-9) -> dict[int, tuple[int, np.ndarray]]:
    """isotropy dimension -> (max sampled stratum dim, point) for an algebra action."""
    out: dict[int, tuple[int, np.ndarray]] = {}
    k = len(gens)
    for v in points:
        scale = max(1.0, float(np.linalg.norm(v)))
        if k:
            M = np.column_stack([X @ v for X in gens])
            idim = k - _linalg.numerical_rank(M, atol=tol * scale)
        else:
            idim = 0
        sd = generic_stratum_dim(gens, C, quad, v)
        if idim not in out or sd > out[idim][0]:
            out[idim] = (sd, v)
    return out


def local_model_match(x, spec: GroupSpec, S: SymplecticSpace | None = None, eps: float = 1e-3, seed: int = 0,
                      strat: Stratification | None = None) -> LocalModelReport:
    """Compare the stratification of the slice reduction at 0 with the ambient strata near x."""
    x = np.asarray(x, dtype=float)
    sm = slice_model(x, spec, S)
    notes: list[str] = []
    partial = False
    if isinstance(spec, FiniteMatrixGroup):
        sub = sm.finite_group
        local = _enumerate_finite(sub)
        slice_pairs = set()
        for s in local.strata:
            y = x + eps * s.representative
            slice_pairs.add((orbit_type(spec, y), s.stratum_dim))
        strat = strat or _enumerate_finite(spec)
        elements = close_group(spec)
        Hx = isotropy(spec, x).elements
        ambient_pairs = set()
        for s in strat.strata:
            if any(conjugate(s.subgroup, g) <= Hx for g in elements):
                ambient_pairs.add((s.isotropy_class, s.stratum_dim))
    elif isinstance(spec, Torus):
        slice_pairs = set(_slice_strata_torus(sm, spec, eps))
        ambient_pairs = set(_ambient_torus_pairs(spec, x))
        if sm.finite_part:
            partial = True
            notes.append(f"isotropy has finite part {list(sm.finite_part)}; compared dimensions only")
    else:
        if not sm.abelian:
            partial = True
            notes.append("nonabelian isotropy; compared dimensions only")
        rng_seed = seed
        m = sm.W.dim
        slice_F = _SliceMomentum(sm.quad, m)
        wpts = zero_level_sampler(slice_F, 12, 1.0, rng_seed).points if m else np.zeros((0, 0))
        wpts = np.vstack([np.zeros((1, m)), wpts]) if m else np.zeros((1, 0))
        cls = _generic_classes(sm.generators, sm.structure, sm.quad, m, wpts)
        slice_pairs = set()
        for idim, (sd, w) in cls.items():
            y = _project_to_zero(spec, sm.lift(eps * w / max(1.0, np.linalg.norm(w))))
            slice_pairs.add((orbit_type(spec, y), sd))
        F = momentum_map(spec)
        rad = 1e-2 * max(1.0, float(np.linalg.norm(x)))
        near = zero_level_sampler(F, 12, rad, seed + 7, center=x).points
        ambient_pairs = set()
        for v in np.vstack([x[None, :], near]):
            ambient_pairs.add((orbit_type(spec, v), sampled_stratum_dim(spec, v)))
        # keep the largest dimension per class on both sides
        slice_pairs = set(_max_per_class(slice_pairs))
        ambient_pairs = set(_max_per_class(ambient_pairs))
    if partial:
        match = sorted(d for _, d in slice_pairs) == sorted(d for _, d in ambient_pairs)
    else:
        match = slice_pairs == ambient_pairs
    fmt = lambda pairs: sorted([class_label(c), d] for c, d in pairs)
    return LocalModelReport([float(v) for v in x], fmt(slice_pairs), fmt(ambient_pairs), bool(match), partial, notes)


def _max_per_class(pairs):
    best: dict = {}
    for c, d in pairs:
        best[c] = max(best.get(c, -1), d)
    return list(best.items())


def local_model_base_points(spec: GroupSpec, count: int = 20, seed: int = 0, strat: Stratification | None = None) -> np.ndarray:
    """Stratum representatives first, then sampled zero-level points, ``count`` in total."""
    strat = strat or enumerate_strata(spec, seed=seed, with_slices=False)
    reps = [s.representative for s in strat.strata]
    F = momentum_map(spec)
    extra = zero_level_sampler(F, max(count - len(reps), 0), 1.0, seed).points
    pts = np.vstack([np.array(reps).reshape(-1, spec.dim), extra])
    return pts[:count]


# --------------------------------------------------------------------------
# per-stratum regular reduction


@dataclass
class MWMReport:
    isotropy_class: tuple
    fixed_space_dim: int
    quotient_group: dict
    reduced_dim: int
    sampled_ok: bool
    samples: int

    def to_json(self) -> dict:
        return {
            "class": class_label(self.isotropy_class),
            "fixed_space_dim": self.fixed_space_dim,
            "quotient_group": self.quotient_group,
            "reduced_dim": self.reduced_dim,
            "sampled_ok": self.sampled_ok,
            "samples": self.samples,
        }


def mwm_stratum(spec: GroupSpec, H, S: SymplecticSpace | None = None, F: MomentumMap | None = None,
                seed: int = 0, samples: int = 5) -> MWMReport:
    """Reduce V^H by L = N(H)/H and report dim (V^H ∩ F_L^{-1}(0))/L.

    ``H`` is a subgroup (finite case) or a support pattern / class identifier
    (torus case).
    """
    F = F or momentum_map(spec)
    d = spec.dim
    rng = np.random.default_rng(seed)
    if isinstance(spec, FiniteMatrixGroup):
        if isinstance(H, tuple) and H and H[0] == "finite":
            elements = close_group(spec)
            H = frozenset(g for g in elements if _flat(g) in set(H[1]))
        H = frozenset(H)
        V = fixed_space_exact(H, d)
        if pointwise_stabilizer(spec, V) != H:
            raise PreconditionError("subgroup is not realized as an isotropy group")
        N = normalizer(spec, H)
        elements = close_group(spec)
        ok = True
        for i in range(samples):
            v = _finite_representative(spec, H, V, seed=seed + i)
            orbit_K = {_apply(g, v) for g in elements}
            in_VH = {w for w in orbit_K if all(_apply(h, w) == w for h in H)}
            orbit_N = {_apply(g, v) for g in N}
            ok &= in_VH == orbit_N
        ident = ("finite", canonical_subgroup(elements, H))
        return MWMReport(ident, V.dim, {"order": len(N) // len(H), "dim": 0}, V.dim, bool(ok), samples)
    if isinstance(spec, Torus):
        pats = torus_patterns(spec)
        if isinstance(H, tuple) and H and H[0] == "torus":
            chosen = [p for p in pats if p["class"] == H]
        else:
            chosen = [p for p in pats if tuple(sorted(H)) == p["support"]]
        if not chosen:
            raise PreconditionError("support pattern or class is not realized on the zero level")
        p = chosen[0]
        ident = p["class"]
        coords = torus_fixed_coordinates(spec, p["support"])
        V = coordinate_subspace(spec.n, coords)
        Ldim = p["rank"]
        if V.dim == 0:
            return MWMReport(ident, 0, {"order": 1, "dim": Ldim}, 0, True, 0)
        B = V.basis
        quadV = np.einsum("ip,aij,jq->apq", B, F.quad, B)
        sampler = _SliceMomentum(quadV, V.dim)
        pts = zero_level_sampler(sampler, 4 * samples, 1.0, int(rng.integers(1 << 31))).points
        best = -1
        hits = 0
        gens = _float_gens(spec)
        for w in pts:
            v = B @ w
            try:
                if orbit_type(spec, v) != ident:
                    continue
            except AmbiguityError:
                continue
            hits += 1
            jac = np.einsum("aij,j->ai", quadV, w)
            r = _linalg.numerical_rank(jac) if np.abs(jac).max() > 1e-12 else 0
            orb = np.column_stack([X @ v for X in gens])
            o = _linalg.numerical_rank(orb) if np.abs(orb).max() > 1e-12 else 0
            best = max(best, V.dim - r - o)
        if hits == 0:
            # the class is realized only on lower-dimensional patterns: use a representative directly
            v = _torus_point(spec, p["support"], p["r"])
            best = generic_stratum_dim(gens, structure_constants(spec), F.quad, v, V)
            hits = 1
        return MWMReport(ident, V.dim, {"order": 1, "dim": Ldim}, best, hits > 0, hits)
    raise PreconditionError("per-stratum reduction is implemented for finite groups and tori")


# --------------------------------------------------------------------------
# frontier diagnostic


def frontier_diagnostic(strat: Stratification, steps: Sequence[float] = (1e-1, 1e-2, 1e-3)) -> list[dict]:
    """Approach each lower stratum from an upper one; the limit's isotropy must be strictly larger."""
    spec = strat.spec
    out = []
    for lo, up in sorted(strat.closure_pairs(), key=repr):
        s_lo, s_up = strat.by_class(lo), strat.by_class(up)
        x = s_lo.representative
        seq_classes = []
        if isinstance(spec, FiniteMatrixGroup):
            elements = close_group(spec)
            g = next(g for g in elements if conjugate(s_up.subgroup, g) <= s_lo.subgroup)
            w = to_float(g) @ s_up.representative
            seq = [x + t * w for t in steps]
            strict = len(s_lo.subgroup) > len(s_up.subgroup)
        elif isinstance(spec, Torus):
            a, b = next((a, b) for a in s_lo.patterns for b in s_up.patterns if set(a) < set(b))
            ra, rb = torus_pattern_feasible(spec, a), torus_pattern_feasible(spec, b)
            full_a = np.zeros(spec.n)
            full_a[list(a)] = ra
            full_b = np.zeros(spec.n)
            full_b[list(b)] = rb
            x = np.concatenate([np.sqrt(full_a), np.zeros(spec.n)])
            seq = [np.concatenate([np.sqrt(full_a + t * full_b), np.zeros(spec.n)]) for t in steps]
            strict = s_lo.isotropy_dim > s_up.isotropy_dim or (
                s_lo.isotropy_dim == s_up.isotropy_dim and lo != up
            )
        else:
            F = momentum_map(spec)
            near = zero_level_sampler(F, 10, 1e-3 * max(1.0, np.linalg.norm(x)), 1, center=x).points
            seq = [v for v in near if orbit_type(spec, v) == up][: len(steps)]
            strict = s_lo.isotropy_dim > s_up.isotropy_dim
        seq_classes = [orbit_type(spec, v) for v in seq]
        ok = bool(seq) and all(c == up for c in seq_classes) and orbit_type(spec, x) == lo and strict
        out.append({"limit": class_label(lo), "sequence": class_label(up), "ok": ok})
    return out


# --------------------------------------------------------------------------
# abelian model level set


@dataclass
class ModelLevelReport:
    samples: int
    converged: int
    counterexamples: int
    max_lambda: float
    max_FW: float
    offset_solutions: int | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _model_maps(spec: Torus, sm: SliceModel):
    """j : m* -> g* (annihilator of h) and the integer basis of h as columns."""
    k = spec.k
    support = isotropy(spec, sm.base_point).support
    AS = np.array(spec.weights, dtype=float)[:, list(support)].T if support else np.zeros((0, k))
    Hb = np.column_stack([np.array(th, dtype=float) for th in _integer_kernel(AS)]) if _integer_kernel(AS) else np.zeros((k, 0))
    Mq = _linalg.null_basis(Hb.T) if Hb.shape[1] else np.eye(k)
    return Mq, Hb


def abelian_model_level_set(spec: Torus, x, samples: int = 10000, seed: int = 0, radius: float = 0.1,
                            offset=None, tol: float = 1e-10) -> ModelLevelReport:
    """Solve j(lambda) + i(F_W(v)) = offset near (0, 0) by Newton from random starts.

    With zero offset every solution must have lambda = 0 and F_W(v) = 0.
    """
    if not isinstance(spec, Torus):
        raise PreconditionError("the model level-set check is implemented for tori")
    sm = slice_model(x, spec)
    if sm.finite_part:
        raise PreconditionError("isotropy has a finite part; the identity-component model does not apply")
    k = spec.k
    Mq, Hb = _model_maps(spec, sm)
    m = sm.W.dim
    quad = sm.quad  # one quadratic per integer basis vector of h
    # i maps h* -> g*: a covector on h given in the integer basis theta_b is the
    # unique element of span(h) pairing as prescribed: i(mu) = Hb (Hb^T Hb)^{-1} mu
    iota = Hb @ np.linalg.inv(Hb.T @ Hb) if Hb.shape[1] else np.zeros((k, 0))
    target = np.zeros(k) if offset is None else np.asarray(offset, dtype=float)
    p = Mq.shape[1]
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(samples, p + m))
    U *= (radius * rng.random(samples) ** (1.0 / max(p + m, 1)) / np.maximum(np.linalg.norm(U, axis=1), 1e-300))[:, None]

    def residual(U):
        lam, w = U[:, :p], U[:, p:]
        Fw = 0.5 * np.einsum("ni,bij,nj->nb", w, quad, w) if quad.shape[0] else np.zeros((len(U), 0))
        return lam @ Mq.T + Fw @ iota.T - target, Fw

    converged = np.zeros(samples, dtype=bool)
    for _ in range(60):
        R, _ = residual(U)
        res = np.linalg.norm(R, axis=1)
        converged = res <= 1e-13
        if converged.all():
            break
        act = ~converged
        w = U[act, p:]
        dF = np.einsum("bij,nj->nbi", quad, w) if quad.shape[0] else np.zeros((act.sum(), 0, m))
        Jm = np.concatenate([np.broadcast_to(Mq, (act.sum(), k, p)), np.einsum("kb,nbi->nki", iota, dF)], axis=2)
        U[act] -= np.einsum("nik,nk->ni", np.linalg.pinv(Jm, rcond=1e-12), R[act])
    R, Fw = residual(U)
    converged = np.linalg.norm(R, axis=1) <= 1e-12
    lam_norm = np.linalg.norm(U[:, :p], axis=1) if p else np.zeros(samples)
    fw_norm = np.linalg.norm(Fw, axis=1) if Fw.shape[1] else np.zeros(samples)
    good = converged & (lam_norm <= tol) & (fw_norm <= tol)
    report = ModelLevelReport(
        samples=samples,
        converged=int(converged.sum()),
        counterexamples=int((converged & ~good).sum()) if offset is None else 0,
        max_lambda=float(lam_norm[converged].max()) if converged.any() else 0.0,
        max_FW=float(fw_norm[converged].max()) if converged.any() else 0.0,
    )
    if offset is not None:
        report.offset_solutions = int(good.sum())
    return report


# --------------------------------------------------------------------------
# conjugation


def conjugate_spec(spec: FiniteMatrixGroup, M) -> FiniteMatrixGroup:
    """The group M K M^{-1} for an exact symplectic matrix M."""
    from .groups import exact_matrix, is_symplectic_exact

    M = exact_matrix(M)
    if not is_symplectic_exact(M):
        raise PreconditionError("conjugating matrix is not symplectic")
    Mi = _linalg.inverse_exact(M)
    return FiniteMatrixGroup(tuple(_linalg.matmul_exact(_linalg.matmul_exact(M, g), Mi) for g in spec.generators))


def stratification_report(strat: Stratification, hilbert=None, F: MomentumMap | None = None) -> dict:
    """JSON-ready summary: classes, dims, Hasse diagram, relations and ||F||^2 through the generators."""
    out = strat.to_json()
    if hilbert is not None:
        from .invariants import express_in_generators, generator_relations

        out["relations"] = [r.to_text() for r in generator_relations(hilbert)]
        if F is not None and F.algebra_dim:
            try:
                out["norm_F_squared"] = express_in_generators(F.norm_squared(), hilbert).to_text()
            except Exception as exc:  # reported, not fatal
                out["norm_F_squared"] = f"not expressible: {exc}"
    return out
