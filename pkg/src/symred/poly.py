"""Exact multivariate polynomials with rational coefficients.

Terms are stored as ``{exponent tuple: Fraction}``; the monomial order is
graded lexicographic everywhere (total degree first, then lexicographic in
generator order).  Two serializations round-trip exactly: the text form
``3/2*q1^2*p2 - q1*p1 + 4`` and a JSON term list.
"""
from __future__ import annotations

import itertools
import re
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]


def coordinate_names(n: int) -> tuple[str, ...]:
    """Darboux coordinate names ``q1..qn, p1..pn``."""
    return tuple(f"q{i}" for i in range(1, n + 1)) + tuple(f"p{i}" for i in range(1, n + 1))


def y_names(m: int) -> tuple[str, ...]:
    return tuple(f"y{i}" for i in range(1, m + 1))


def grlex_key(m: Monomial) -> tuple:
    return (sum(m), m)


@lru_cache(maxsize=None)
def monomials_of_degree(nvars: int, d: int) -> tuple[Monomial, ...]:
    """All exponent vectors of total degree d, in descending grlex order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(nvars), d):
        e = [0] * nvars
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return tuple(sorted(set(out), reverse=True))


def weighted_monomials(weights: Sequence[int], d: int) -> tuple[Monomial, ...]:
    """Exponent vectors e with sum(e_i * weights_i) == d, descending grlex order."""
    m = len(weights)
    out: list[Monomial] = []

    def rec(i, remaining, acc):
        if i == m:
            if remaining == 0:
                out.append(tuple(acc))
            return
        w = weights[i]
        for k in range(remaining // w + 1):
            rec(i + 1, remaining - k * w, acc + [k])

    rec(0, d, [])
    return tuple(sorted(out, key=grlex_key, reverse=True))


class Poly:
    __slots__ = ("gens", "terms", "_hash")

    def __init__(self, gens: Sequence[str], terms: Mapping[Monomial, object] | None = None):
        self.gens = tuple(gens)
        clean: dict[Monomial, Fraction] = {}
        for m, c in (terms or {}).items():
            c = Fraction(c)
            if c != 0:
                if len(m) != len(self.gens):
                    raise ValueError(f"monomial {m} has wrong arity for {self.gens}")
                clean[tuple(m)] = c
        self.terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, gens):
        return cls(gens)

    @classmethod
    def const(cls, gens, c):
        return cls(gens, {(0,) * len(gens): c})

    @classmethod
    def var(cls, gens, i: int | str):
        gens = tuple(gens)
        if isinstance(i, str):
            i = gens.index(i)
        e = [0] * len(gens)
        e[i] = 1
        return cls(gens, {tuple(e): 1})

    @classmethod
    def quadratic_form(cls, gens, S) -> Poly:
        """v^T S v for a symmetric matrix S (exact entries)."""
        n = len(gens)
        terms: dict[Monomial, Fraction] = {}
        for i in range(n):
            for j in range(n):
                c = Fraction(S[i][j])
                if c:
                    e = [0] * n
                    e[i] += 1
                    e[j] += 1
                    terms[tuple(e)] = terms.get(tuple(e), Fraction(0)) + c
        return cls(gens, terms)

    # -- basic protocol -----------------------------------------------
    @property
    def nvars(self) -> int:
        return len(self.gens)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.gens == other.gens and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Poly.const(self.gens, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.gens, frozenset(self.terms.items())))
        return self._hash

    def _coerce(self, other) -> Poly:
        if isinstance(other, Poly):
            if other.gens != self.gens:
                raise ValueError(f"generator mismatch: {self.gens} vs {other.gens}")
            return other
        return Poly.const(self.gens, other)

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, Fraction(0)) + c
        return Poly(self.gens, t)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.gens, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = Fraction(other)
            return Poly(self.gens, {m: c * v for m, v in self.terms.items()})
        other = self._coerce(other)
        t: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                t[m] = t.get(m, Fraction(0)) + c1 * c2
        return Poly(self.gens, t)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = Fraction(c)
        return Poly(self.gens, {m: v / c for m, v in self.terms.items()})

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = Poly.const(self.gens, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- structure ----------------------------------------------------
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self.terms}) <= 1

    def homogeneous_components(self) -> dict[int, Poly]:
        out: dict[int, dict] = {}
        for m, c in self.terms.items():
            out.setdefault(sum(m), {})[m] = c
        return {d: Poly(self.gens, t) for d, t in sorted(out.items())}

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda mc: grlex_key(mc[0]), reverse=True)

    def leading_term(self) -> tuple[Monomial, Fraction]:
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        m = max(self.terms, key=grlex_key)
        return m, self.terms[m]

    def coefficient(self, m: Monomial) -> Fraction:
        return self.terms.get(tuple(m), Fraction(0))

    def coeff_vector(self, monomials: Sequence[Monomial]) -> list[Fraction]:
        return [self.terms.get(m, Fraction(0)) for m in monomials]

    @classmethod
    def from_vector(cls, gens, monomials: Sequence[Monomial], vec: Sequence) -> Poly:
        return cls(gens, {m: c for m, c in zip(monomials, vec)})

    def diff(self, i: int | str) -> Poly:
        if isinstance(i, str):
            i = self.gens.index(i)
        t = {}
        for m, c in self.terms.items():
            if m[i]:
                e = list(m)
                e[i] -= 1
                t[tuple(e)] = c * m[i]
        return Poly(self.gens, t)

    def gradient(self) -> list[Poly]:
        return [self.diff(i) for i in range(self.nvars)]

    # -- substitution -------------------------------------------------
    def compose(self, polys: Sequence[Poly]) -> Poly:
        """Substitute ``polys[i]`` for generator i; result lives in their ring."""
        if len(polys) != self.nvars:
            raise ValueError("compose needs one polynomial per generator")
        gens = polys[0].gens
        cache: dict[tuple[int, int], Poly] = {}

        def power(i, k):
            if (i, k) not in cache:
                cache[(i, k)] = Poly.const(gens, 1) if k == 0 else power(i, k - 1) * polys[i]
            return cache[(i, k)]

        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            term = Poly.const(gens, c)
            for i, k in enumerate(m):
                if k:
                    term = term * power(i, k)
            for mm, cc in term.terms.items():
                out[mm] = out.get(mm, Fraction(0)) + cc
        return Poly(gens, out)

    def linear_substitute(self, M) -> Poly:
        """f∘M, i.e. the polynomial v -> f(M v) for an exact square matrix M."""
        n = self.nvars
        rows = [Poly(self.gens, {tuple(int(j == k) for k in range(n)): M[i][j] for j in range(n)}) for i in range(n)]
        return self.compose(rows)

    def rename(self, gens: Sequence[str]) -> Poly:
        if len(gens) != self.nvars:
            raise ValueError("arity mismatch")
        return Poly(gens, self.terms)

    # -- evaluation ---------------------------------------------------
    def __call__(self, point):
        """Exact evaluation when the point is rational, float otherwise."""
        if all(isinstance(x, (int, Fraction)) for x in point):
            total = Fraction(0)
            for m, c in self.terms.items():
                v = c
                for x, k in zip(point, m):
                    if k:
                        v *= Fraction(x) ** k
                total += v
            return total
        return float(CompiledPolys([self])(np.asarray(point, dtype=float))[0])

    # -- serialization ------------------------------------------------
    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for idx, (m, c) in enumerate(self.sorted_terms()):
            factors = []
            for g, k in zip(self.gens, m):
                if k == 1:
                    factors.append(g)
                elif k > 1:
                    factors.append(f"{g}^{k}")
            mag = abs(c)
            if factors:
                body = "*".join(factors) if mag == 1 else f"{mag}*" + "*".join(factors)
            else:
                body = str(mag)
            if idx == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append((" - " if c < 0 else " + ") + body)
        return "".join(parts)

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"Poly({self.to_text()!r}, gens={self.gens})"

    _TERM = re.compile(r"([+-]?)([^+-]+)")

    @classmethod
    def from_text(cls, text: str, gens: Sequence[str]) -> Poly:
        gens = tuple(gens)
        index = {g: i for i, g in enumerate(gens)}
        s = text.replace(" ", "").replace("**", "^")
        if not s:
            raise ValueError("empty polynomial text")
        terms: dict[Monomial, Fraction] = {}
        pos = 0
        for match in cls._TERM.finditer(s):
            if match.start() != pos:
                raise ValueError(f"cannot parse {text!r}")
            pos = match.end()
            sign = -1 if match.group(1) == "-" else 1
            coeff = Fraction(sign)
            e = [0] * len(gens)
            for factor in match.group(2).split("*"):
                if not factor:
                    raise ValueError(f"cannot parse {text!r}")
                if factor[0].isdigit():
                    coeff *= Fraction(factor)
                    continue
                name, _, power = factor.partition("^")
                if name not in index:
                    raise ValueError(f"unknown generator {name!r} in {text!r}")
                e[index[name]] += int(power) if power else 1
            terms[tuple(e)] = terms.get(tuple(e), Fraction(0)) + coeff
        if pos != len(s):
            raise ValueError(f"cannot parse {text!r}")
        return cls(gens, terms)

    def to_json(self) -> dict:
        return {
            "gens": list(self.gens),
            "terms": [[str(c), list(m)] for m, c in self.sorted_terms()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> Poly:
        return cls(data["gens"], {tuple(m): Fraction(c) for c, m in data["terms"]})


def poisson_bracket(f: Poly, g: Poly) -> Poly:
    """Canonical bracket sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i).

    Generators must be ordered (q_1..q_n, p_1..p_n).
    """
    if f.gens != g.gens:
        raise ValueError("bracket of polynomials in different rings")
    nv = f.nvars
    if nv % 2:
        raise ValueError("odd number of coordinates")
    n = nv // 2
    out = Poly.zero(f.gens)
    for i in range(n):
        out = out + f.diff(i) * g.diff(n + i) - f.diff(n + i) * g.diff(i)
    return out


def divide(f: Poly, divisors: Sequence[Poly]) -> tuple[list[Poly], Poly]:
    """Multivariate division in grlex order: f = sum q_i d_i + r."""
    divisors = [d for d in divisors if not d.is_zero()]
    quotients = [Poly.zero(f.gens) for _ in divisors]
    remainder = Poly.zero(f.gens)
    p = f
    leads = [d.leading_term() for d in divisors]
    while not p.is_zero():
        m, c = p.leading_term()
        for i, (lm, lc) in enumerate(leads):
            if all(a >= b for a, b in zip(m, lm)):
                q = Poly(f.gens, {tuple(a - b for a, b in zip(m, lm)): c / lc})
                quotients[i] = quotients[i] + q
                p = p - q * divisors[i]
                break
        else:
            lt = Poly(f.gens, {m: c})
            remainder = remainder + lt
            p = p - lt
    return quotients, remainder


class CompiledPolys:
    """Vectorized float evaluator for a list of polynomials in the same ring."""

    def __init__(self, polys: Sequence[Poly]):
        polys = list(polys)
        self.nvars = polys[0].nvars if polys else 0
        monos = sorted({m for p in polys for m in p.terms}, key=grlex_key, reverse=True)
        if not monos:
            monos = [(0,) * self.nvars]
        self.exponents = np.array(monos, dtype=np.int64).reshape(len(monos), self.nvars)
        idx = {m: i for i, m in enumerate(monos)}
        C = np.zeros((len(polys), len(monos)))
        for r, p in enumerate(polys):
            for m, c in p.terms.items():
                C[r, idx[m]] = float(c)
        self.coeffs = C
        self._maxdeg = int(self.exponents.max()) if self.exponents.size else 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at one point (shape (nvars,)) or a batch (shape (N, nvars))."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        # powers[k] = X**k, then gather by exponent
        powers = np.ones((self._maxdeg + 1,) + X.shape)
        for k in range(1, self._maxdeg + 1):
            powers[k] = powers[k - 1] * X
        cols = np.arange(self.nvars)
        mon = np.prod(powers[self.exponents, :, cols].transpose(2, 0, 1), axis=2) if self.nvars else np.ones((X.shape[0], 1))
        out = mon @ self.coeffs.T
        return out[0] if single else out

