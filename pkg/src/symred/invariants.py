"""Invariant polynomials, Hilbert maps and the reduced Poisson structure.

Everything here is exact rational arithmetic.  Generator sets are built
degree by degree: at each degree the invariants are compared with the span
of products of generators already found, and the complement is adjoined.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from sympy import Matrix

from . import _linalg
from .errors import NotExpressibleError, PreconditionError
from .groups import (
    FiniteMatrixGroup,
    GroupSpec,
    MatrixLieAlgebra,
    MomentumMap,
    Torus,
    close_group,
    momentum_map,
)
from .poly import (
    CompiledPolys,
    Poly,
    coordinate_names,
    divide,
    grlex_key,
    monomials_of_degree,
    poisson_bracket,
    weighted_monomials,
    y_names,
)

LIE_DEFAULT_DEGREE_BOUND = 4


# --------------------------------------------------------------------------
# averaging and counting


def _substituted_powers(g, gens, d: int) -> list[list[Poly]]:
    """powers[i][k] = (row i of g applied to v)^k for k <= d."""
    nv = len(gens)
    out = []
    for i in range(nv):
        lin = Poly(gens, {tuple(int(j == c) for c in range(nv)): g[i][j] for j in range(nv)})
        pw = [Poly.const(gens, 1)]
        for _ in range(d):
            pw.append(pw[-1] * lin)
        out.append(pw)
    return out


def reynolds(f: Poly, group: FiniteMatrixGroup) -> Poly:
    """Group average (1/|K|) sum_g f∘g."""
    elements = close_group(group)
    total = Poly.zero(f.gens)
    for g in elements:
        total = total + f.linear_substitute(g)
    return total / len(elements)


def _reynolds_monomials(group: FiniteMatrixGroup, gens, d: int) -> list[Poly]:
    elements = close_group(group)
    monos = monomials_of_degree(len(gens), d)
    acc = [dict() for _ in monos]
    for g in elements:
        pw = _substituted_powers(g, gens, d)
        for idx, m in enumerate(monos):
            term = Poly.const(gens, 1)
            for i, k in enumerate(m):
                if k:
                    term = term * pw[i][k]
            for mm, c in term.terms.items():
                acc[idx][mm] = acc[idx].get(mm, Fraction(0)) + c
    n = len(elements)
    return [Poly(gens, {m: c / n for m, c in t.items()}) for t in acc]


def molien_series(group: FiniteMatrixGroup, dmax: int) -> list[int]:
    """Coefficients of (1/|K|) sum_g 1/det(I - t g) up to t^dmax."""
    elements = close_group(group)
    total = [Fraction(0)] * (dmax + 1)
    for g in elements:
        cp = Matrix([[x for x in r] for r in g]).charpoly().all_coeffs()  # det(lambda I - g)
        den = [Fraction(int(c.p), int(c.q)) for c in cp]  # = coefficients of det(I - t g) in t
        inv = [Fraction(0)] * (dmax + 1)
        inv[0] = Fraction(1) / den[0]
        for k in range(1, dmax + 1):
            s = sum((den[j] * inv[k - j] for j in range(1, min(k, len(den) - 1) + 1)), Fraction(0))
            inv[k] = -s / den[0]
        total = [a + b for a, b in zip(total, inv)]
    out = []
    for c in total:
        c = c / len(elements)
        if c.denominator != 1:
            raise ArithmeticError(f"non-integral Molien coefficient {c}")
        out.append(int(c))
    return out


def molien_dimension(group: FiniteMatrixGroup, d: int) -> int:
    if d < 0:
        raise ValueError("degree must be non-negative")
    return molien_series(group, d)[d]


def _zero_weight_pairs(spec: Torus, d: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    n = spec.n
    out = []
    for e in monomials_of_degree(2 * n, d):
        a, b = e[:n], e[n:]
        if all(sum((a[j] - b[j]) * spec.weights[r][j] for j in range(n)) == 0 for r in range(spec.k)):
            out.append((a, b))
    return out


def torus_invariant_count(spec: Torus, d: int) -> int:
    """Real dimension of degree-d invariants = number of zero-weight monomials z^a zbar^b."""
    return len(_zero_weight_pairs(spec, d))


def _realified(a, b, gens) -> tuple[Poly, Poly]:
    """Real and imaginary parts of z^a zbar^b with z_j = q_j + i p_j."""
    n = len(a)
    re, im = Poly.const(gens, 1), Poly.zero(gens)
    for j in range(n):
        q, p = Poly.var(gens, j), Poly.var(gens, n + j)
        for sign, k in ((1, a[j]), (-1, b[j])):
            for _ in range(k):
                re, im = re * q - im * p * sign, re * p * sign + im * q
    return re, im


# --------------------------------------------------------------------------
# invariant bases per degree


def invariant_basis(group: GroupSpec, d: int) -> list[Poly]:
    """Basis (reduced echelon, grlex) of the degree-d homogeneous invariants."""
    n2 = group.dim
    gens = coordinate_names(n2 // 2)
    monos = monomials_of_degree(n2, d)
    if isinstance(group, FiniteMatrixGroup):
        cands = _reynolds_monomials(group, gens, d)
    elif isinstance(group, Torus):
        cands = []
        for a, b in _zero_weight_pairs(group, d):
            re, im = _realified(a, b, gens)
            cands.extend([re, im])
    else:
        F = momentum_map(group)
        rows = []
        for comp in F.components:
            images = [poisson_bracket(Poly(gens, {m: 1}), comp) for m in monos]
            for m in monos:
                rows.append([img.coefficient(m) for img in images])
        ns = _linalg.nullspace(rows, len(monos))
        cands = [Poly.from_vector(gens, monos, v) for v in ns]
    vecs = [c.coeff_vector(monos) for c in cands if not c.is_zero()]
    R, _ = _linalg.rref(vecs, len(monos)) if vecs else ([], ())
    return [Poly.from_vector(gens, monos, r) for r in R]


def _torus_candidates(group: Torus, d: int, gens) -> list[Poly]:
    """Realified zero-weight monomials, self-conjugate ones first, Re before Im."""
    pairs = _zero_weight_pairs(group, d)
    selfconj = sorted([ab for ab in pairs if ab[0] == ab[1]], reverse=True)
    others = sorted([ab for ab in pairs if ab[0] > ab[1]], reverse=True)
    out = []
    for a, b in selfconj:
        out.append(_realified(a, b, gens)[0])
    for a, b in others:
        re, im = _realified(a, b, gens)
        out.extend([re, im])
    return [p for p in out if not p.is_zero()]


def invariant_dimension(group: GroupSpec, d: int) -> int:
    if isinstance(group, FiniteMatrixGroup):
        return molien_dimension(group, d)
    if isinstance(group, Torus):
        return torus_invariant_count(group, d)
    return len(invariant_basis(group, d))


def is_invariant(f: Poly, group: GroupSpec) -> bool:
    if isinstance(group, FiniteMatrixGroup):
        return all(f.linear_substitute(g) == f for g in group.generators)
    F = momentum_map(group)
    return all(poisson_bracket(f, c).is_zero() for c in F.components)


# --------------------------------------------------------------------------
# Hilbert maps


@dataclass(eq=False)
class HilbertMap:
    generators: list[Poly]
    group: GroupSpec
    degree_bound: int
    complete: bool
    _products: dict = field(default_factory=dict, repr=False)
    _compiled: CompiledPolys | None = field(default=None, repr=False)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(p.degree() for p in self.generators)

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def gens(self) -> tuple[str, ...]:
        return self.generators[0].gens

    @property
    def ynames(self) -> tuple[str, ...]:
        return y_names(self.m)

    def product(self, e: Sequence[int]) -> Poly:
        """p^e = prod_i p_i^{e_i}, cached."""
        e = tuple(e)
        if e not in self._products:
            if sum(e) == 0:
                self._products[e] = Poly.const(self.gens, 1)
            else:
                i = max(j for j, k in enumerate(e) if k)
                lower = list(e)
                lower[i] -= 1
                self._products[e] = self.product(lower) * self.generators[i]
        return self._products[e]

    def __call__(self, v) -> np.ndarray:
        if self._compiled is None:
            self._compiled = CompiledPolys(self.generators)
        return self._compiled(v)

    def pullback(self, F: Poly) -> Poly:
        """F∘p for a polynomial F in y1..ym."""
        out = Poly.zero(self.gens)
        for e, c in F.terms.items():
            out = out + self.product(e) * c
        return out

    def product_matrix(self, d: int) -> tuple[list, list, list]:
        """(y-monomials of weighted degree d, v-monomials, rows = coefficient vectors)."""
        ys = weighted_monomials(self.degrees, d)
        monos = monomials_of_degree(len(self.gens), d)
        rows = [self.product(e).coeff_vector(monos) for e in ys]
        return list(ys), list(monos), rows

    def span_dimension(self, d: int) -> int:
        ys, monos, rows = self.product_matrix(d)
        return _linalg.rank(rows, len(monos)) if rows else 0

    def to_json(self) -> dict:
        return {
            "generators": [p.to_text() for p in self.generators],
            "degrees": list(self.degrees),
            "degree_bound": self.degree_bound,
            "complete_to_degree_bound": self.complete,
        }


def default_degree_bound(group: GroupSpec) -> int:
    if isinstance(group, FiniteMatrixGroup):
        return len(close_group(group))
    if isinstance(group, Torus):
        return 2 * group.n * max(abs(w) for r in group.weights for w in r)
    return LIE_DEFAULT_DEGREE_BOUND


def invariant_generators(group: GroupSpec, degree_bound: int | None = None) -> HilbertMap:
    """Minimal homogeneous generators of the invariant ring up to ``degree_bound``."""
    bound = default_degree_bound(group) if degree_bound is None else int(degree_bound)
    gens = coordinate_names(group.dim // 2)
    found: list[Poly] = []
    for d in range(1, bound + 1):
        monos = monomials_of_degree(group.dim, d)
        if isinstance(group, Torus):
            cands = _torus_candidates(group, d, gens)
        else:
            cands = invariant_basis(group, d)
        expected = invariant_dimension(group, d)
        tmp = HilbertMap(found, group, bound, False) if found else None
        span_rows = []
        if tmp is not None:
            span_rows = [tmp.product(e).coeff_vector(monos) for e in weighted_monomials(tmp.degrees, d)]
        R, _ = _linalg.rref(span_rows, len(monos)) if span_rows else ([], ())
        current = [list(r) for r in R]
        r0 = len(current)
        new: list[Poly] = []
        for c in cands:
            vec = c.coeff_vector(monos)
            if _linalg.rank(current + [vec], len(monos)) > len(current):
                current.append(vec)
                new.append(c)
        if not isinstance(group, Torus) and new:
            # reduced-echelon representatives of the complement
            Rs, _ = _linalg.rref([list(r) for r in R] + [c.coeff_vector(monos) for c in new], len(monos))
            span_pivots = set(_linalg.rref(span_rows, len(monos))[1]) if span_rows else set()
            reduced = []
            for row in Rs:
                lead = next(i for i, x in enumerate(row) if x != 0)
                if lead not in span_pivots:
                    reduced.append(Poly.from_vector(gens, monos, row))
            if len(reduced) == len(new):
                new = reduced
        found.extend(new)
        total = r0 + len(new)
        if total != expected:
            raise PreconditionError(
                f"degree {d}: invariant count {expected} but generators span {total}; generator search incomplete"
            )
    if not found:
        raise PreconditionError("no invariants found below the degree bound")
    complete = not isinstance(group, MatrixLieAlgebra) and (
        isinstance(group, Torus) or bound >= len(close_group(group))
    )
    return HilbertMap(found, group, bound, complete)


def check_minimality(H: HilbertMap) -> bool:
    """No generator lies in the subalgebra generated by the others."""
    for i, p in enumerate(H.generators):
        others = [q for j, q in enumerate(H.generators) if j != i]
        d = p.degree()
        monos = monomials_of_degree(len(H.gens), d)
        rows = []
        if others:
            Ho = HilbertMap(others, H.group, H.degree_bound, False)
            rows = [Ho.product(e).coeff_vector(monos) for e in weighted_monomials(Ho.degrees, d)]
        if rows and _linalg.rank(rows + [p.coeff_vector(monos)], len(monos)) == _linalg.rank(rows, len(monos)):
            return False
    return True


def degree_dimension_table(H: HilbertMap, dmax: int) -> list[dict]:
    """Per degree: dimension spanned by generator products vs the independent count."""
    out = []
    for d in range(dmax + 1):
        spanned = 1 if d == 0 else H.span_dimension(d)
        out.append({"degree": d, "spanned": spanned, "expected": invariant_dimension(H.group, d)})
    return out


# --------------------------------------------------------------------------
# expressing invariants through generators


def express_in_generators(f: Poly, H: HilbertMap) -> Poly:
    """F in y1..ym with F∘p == f; free coordinates of the linear solve set to zero."""
    ynames = H.ynames
    result = Poly.zero(ynames)
    for d, comp in f.homogeneous_components().items():
        if d == 0:
            result = result + Poly.const(ynames, comp.coefficient((0,) * f.nvars))
            continue
        ys, monos, rows = H.product_matrix(d)
        if not ys:
            raise NotExpressibleError(f"no generator products of degree {d}")
        cols = [list(r) for r in zip(*rows)]  # monos x ys
        sol = _linalg.solve_particular(cols, comp.coeff_vector(monos), len(ys))
        if sol is None or Poly.from_vector(H.gens, monos, [
            sum((rows[j][i] * sol[j] for j in range(len(ys))), Fraction(0)) for i in range(len(monos))
        ]) != comp:
            raise NotExpressibleError(f"degree-{d} component is not in the span of generator products")
        result = result + Poly.from_vector(ynames, ys, sol)
    return result


def generator_relations(H: HilbertMap, max_degree: int | None = None) -> list[Poly]:
    """New polynomial relations among generators, degree by degree up to 2*max(deg)."""
    top = 2 * max(H.degrees) if max_degree is None else max_degree
    ynames = H.ynames
    found: list[Poly] = []
    for d in range(1, top + 1):
        ys, monos, rows = H.product_matrix(d)
        if not ys:
            continue
        cols = [list(r) for r in zip(*rows)]
        ns = _linalg.nullspace(cols, len(ys))
        if not ns:
            continue
        # multiples of earlier relations
        mult = []
        for rel in found:
            rd = sum(e * w for e, w in zip(rel.leading_term()[0], H.degrees))
            for e in weighted_monomials(H.degrees, d - rd) if d - rd >= 0 else ():
                mult.append((Poly(ynames, {e: 1}) * rel).coeff_vector(ys))
        base_rank = _linalg.rank(mult, len(ys)) if mult else 0
        new = []
        cur = list(mult)
        for v in ns:
            if _linalg.rank(cur + [v], len(ys)) > base_rank + len(new):
                cur.append(v)
                new.append(v)
        if new:
            # canonical representatives: echelon form modulo the multiples
            R, piv = _linalg.rref(mult + new, len(ys))
            mult_piv = set(_linalg.rref(mult, len(ys))[1]) if mult else set()
            reps = [Poly.from_vector(ynames, ys, r) for r, p in zip(R, piv) if p not in mult_piv]
            found.extend(reps[: len(new)] if len(reps) >= len(new) else [Poly.from_vector(ynames, ys, v) for v in new])
    return found


# --------------------------------------------------------------------------
# reduced Poisson structure


@dataclass(eq=False)
class PoissonStructure:
    matrix: list[list[Poly]]
    hilbert: HilbertMap

    @property
    def m(self) -> int:
        return len(self.matrix)

    def antisymmetric(self) -> bool:
        return all(self.matrix[i][j] == -self.matrix[j][i] for i in range(self.m) for j in range(self.m))

    def substitution_residuals(self) -> list[list[Poly]]:
        """Lambda_ij∘p - {p_i, p_j}, all zero when the structure is right."""
        H = self.hilbert
        return [
            [H.pullback(self.matrix[i][j]) - poisson_bracket(H.generators[i], H.generators[j]) for j in range(self.m)]
            for i in range(self.m)
        ]

    def jacobi_residuals(self) -> dict[tuple[int, int, int], Poly]:
        """Cyclic sum of Lambda_il d_l Lambda_jk, pulled back along p (exact)."""
        H = self.hilbert
        L = self.matrix
        m = self.m
        dL = [[[L[i][j].diff(l) for l in range(m)] for j in range(m)] for i in range(m)]
        out = {}
        for i, j, k in itertools.combinations(range(m), 3):
            s = Poly.zero(H.ynames)
            for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
                for l in range(m):
                    if L[a][l] and dL[b][c][l]:
                        s = s + L[a][l] * dL[b][c][l]
            out[(i, j, k)] = H.pullback(s)
        return out

    def bracket_jacobi_residuals(self) -> dict[tuple[int, int, int], Poly]:
        """Cyclic sum {p_i, {p_j, p_k}} computed upstairs."""
        P = self.hilbert.generators
        out = {}
        for i, j, k in itertools.combinations(range(self.m), 3):
            out[(i, j, k)] = (
                poisson_bracket(P[i], poisson_bracket(P[j], P[k]))
                + poisson_bracket(P[j], poisson_bracket(P[k], P[i]))
                + poisson_bracket(P[k], poisson_bracket(P[i], P[j]))
            )
        return out

    def hamiltonian_vector_field(self, h_red: Poly):
        """Compiled y -> Lambda(y) grad h_red(y)."""
        grads = [h_red.diff(j) for j in range(self.m)]
        comps = []
        for i in range(self.m):
            s = Poly.zero(h_red.gens)
            for j in range(self.m):
                if self.matrix[i][j] and grads[j]:
                    s = s + self.matrix[i][j] * grads[j]
            comps.append(s)
        return CompiledPolys(comps)

    def to_json(self) -> list[list[str]]:
        return [[p.to_text() for p in row] for row in self.matrix]


def reduced_structure_matrix(H: HilbertMap) -> PoissonStructure:
    m = H.m
    ynames = H.ynames
    L = [[Poly.zero(ynames) for _ in range(m)] for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            L[i][j] = express_in_generators(poisson_bracket(H.generators[i], H.generators[j]), H)
            L[j][i] = -L[i][j]
    return PoissonStructure(L, H)


def noether_table(H: HilbertMap, F: MomentumMap) -> list[list[Poly]]:
    """{p_i, F_a} for every generator and momentum component."""
    return [[poisson_bracket(p, f) for f in F.components] for p in H.generators]


def bracket_closure(H: HilbertMap) -> bool:
    """Every {p_i, p_j} is again invariant."""
    return all(
        is_invariant(poisson_bracket(H.generators[i], H.generators[j]), H.group)
        for i in range(H.m)
        for j in range(i + 1, H.m)
    )


# --------------------------------------------------------------------------
# Poisson ideal of the zero level


@dataclass
class IdealDiagnostic:
    max_residual: float
    exact_membership: list[bool]
    family: list[str]


def poisson_ideal_diagnostic(
    f: Poly,
    F: MomentumMap,
    samples: np.ndarray,
    family: Sequence[Poly] | None = None,
    tol: float = 1e-10,
) -> IdealDiagnostic:
    """Max |{f, h}| over samples of F^{-1}(0) for h vanishing there.

    Exact membership of {f, h} in the ideal (F_1..F_k) is tested by division.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if family is None:
        n2 = F.norm_squared()
        family = [] if n2.is_zero() else [n2, f * n2]
        for a in range(F.algebra_dim):
            for b in range(a, F.algebra_dim):
                family.append(F.components[a] * F.components[b])
    family = list(family)
    for h in family:
        vals = CompiledPolys([h])(samples)[:, 0] if len(samples) else np.zeros(0)
        if vals.size and np.max(np.abs(vals)) > tol:
            raise PreconditionError(f"test function {h.to_text()} does not vanish on the sampled zero level")
    worst = 0.0
    exact = []
    for h in family:
        br = poisson_bracket(f, h)
        if len(samples):
            worst = max(worst, float(np.max(np.abs(CompiledPolys([br])(samples)[:, 0]))))
        _, rem = divide(br, list(F.components))
        exact.append(rem.is_zero())
    return IdealDiagnostic(worst, exact, [h.to_text() for h in family])
