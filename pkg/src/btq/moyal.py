"""Truncated formal Weyl algebra with the Moyal-Weyl product.

Polynomials in (x_1, p_1, ..., x_n, p_n) with coefficients in Q(i), graded by
powers of hbar. The symplectic convention is {x_i, p_j} = delta_ij, and the
product is

    f * g = m o exp(-(i hbar / 2) pi)(f (x) g),

with pi = sum_i (d/dx_i (x) d/dp_i - d/dp_i (x) d/dx_i). For polynomial
inputs the exponential series terminates, so every truncated product is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from sympy import QQ, QQ_I

DEFAULT_K = 6

Exponents = tuple[int, ...]
Key = tuple[Exponents, int]  # (exponents over 2n variables, power of hbar)

ZERO = QQ_I(0, 0)
ONE = QQ_I(1, 0)
I_UNIT = QQ_I(0, 1)


def gaussian(c) -> "QQ_I.dtype":
    """Coerce int, Fraction, complex or sympy numbers into an exact Q(i) element."""
    if isinstance(c, QQ_I.dtype):
        return c
    if isinstance(c, bool):
        c = int(c)
    if isinstance(c, int):
        return QQ_I(c, 0)
    if isinstance(c, Fraction):
        return QQ_I(QQ(c.numerator, c.denominator), 0)
    if isinstance(c, float):
        f = Fraction(c)
        return QQ_I(QQ(f.numerator, f.denominator), 0)
    if isinstance(c, complex):
        re, im = Fraction(c.real), Fraction(c.imag)
        return QQ_I(QQ(re.numerator, re.denominator), QQ(im.numerator, im.denominator))
    return QQ_I.from_sympy(c)


def _conj(c):
    return QQ_I(c.x, -c.y)


@dataclass(frozen=True)
class FormalSeries:
    """Element of W^hbar (or of hbar^-1 W^hbar when ``hbar_min`` is -1)."""

    n: int
    terms: Mapping[Key, object]
    K: int = DEFAULT_K
    hbar_min: int = 0

    def __post_init__(self):
        clean = {}
        for (exps, h), c in self.terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != 2 * self.n:
                raise ValueError(f"exponent vector {exps} does not have length {2 * self.n}")
            if h > self.K:
                continue
            if h < self.hbar_min:
                raise ValueError(f"hbar power {h} below the allowed minimum {self.hbar_min}")
            c = gaussian(c)
            if c:
                key = (exps, int(h))
                clean[key] = clean[key] + c if key in clean else c
        object.__setattr__(self, "terms", {k: v for k, v in clean.items() if v})

    # construction ----------------------------------------------------------
    @classmethod
    def zero(cls, n: int, K: int = DEFAULT_K) -> "FormalSeries":
        return cls(n, {}, K)

    @classmethod
    def constant(cls, n: int, c=1, K: int = DEFAULT_K, hbar_power: int = 0) -> "FormalSeries":
        return cls(n, {((0,) * (2 * n), hbar_power): c}, K, min(0, hbar_power))

    @classmethod
    def variable(cls, n: int, index: int, K: int = DEFAULT_K) -> "FormalSeries":
        """Coordinate number ``index`` in the order (x_1, p_1, ..., x_n, p_n)."""
        exps = [0] * (2 * n)
        exps[index] = 1
        return cls(n, {(tuple(exps), 0): 1}, K)

    @classmethod
    def x(cls, n: int = 1, i: int = 0, K: int = DEFAULT_K) -> "FormalSeries":
        return cls.variable(n, 2 * i, K)

    @classmethod
    def p(cls, n: int = 1, i: int = 0, K: int = DEFAULT_K) -> "FormalSeries":
        return cls.variable(n, 2 * i + 1, K)

    # ring structure over C[[hbar]] --------------------------------------------
    def _like(self, terms, K=None, hbar_min=None) -> "FormalSeries":
        K = self.K if K is None else K
        hbar_min = self.hbar_min if hbar_min is None else hbar_min
        return FormalSeries(self.n, terms, K, hbar_min)

    def _check(self, other: "FormalSeries"):
        if not isinstance(other, FormalSeries):
            raise TypeError(f"expected FormalSeries, got {type(other).__name__}")
        if other.n != self.n:
            raise ValueError(f"mismatched number of variable pairs: {self.n} vs {other.n}")

    def __add__(self, other: "FormalSeries") -> "FormalSeries":
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return self._like(out, min(self.K, other.K), min(self.hbar_min, other.hbar_min))

    def __neg__(self) -> "FormalSeries":
        return self._like({k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "FormalSeries") -> "FormalSeries":
        return self + (-other)

    def scale(self, c) -> "FormalSeries":
        c = gaussian(c)
        return self._like({k: v * c for k, v in self.terms.items()})

    def times_hbar(self, power: int = 1) -> "FormalSeries":
        terms = {(e, h + power): c for (e, h), c in self.terms.items()}
        return self._like(terms, hbar_min=min(self.hbar_min, self.hbar_min + power))

    def pointwise(self, other: "FormalSeries") -> "FormalSeries":
        """Commutative (undeformed) product."""
        self._check(other)
        out: dict = {}
        for (e1, h1), c1 in self.terms.items():
            for (e2, h2), c2 in other.terms.items():
                key = (tuple(a + b for a, b in zip(e1, e2)), h1 + h2)
                out[key] = out[key] + c1 * c2 if key in out else c1 * c2
        return self._like(out, min(self.K, other.K), self.hbar_min + other.hbar_min)

    def truncate(self, K: int) -> "FormalSeries":
        return self._like(self.terms, K)

    def coefficient(self, hbar_power: int) -> "FormalSeries":
        """The hbar^j coefficient as an hbar-free series."""
        return self._like({(e, 0): c for (e, h), c in self.terms.items() if h == hbar_power}, hbar_min=0)

    def is_zero(self) -> bool:
        return not self.terms

    def hbar_powers(self) -> set[int]:
        return {h for _, h in self.terms}

    def max_abs_coefficient(self) -> float:
        return max((math.hypot(float(c.x), float(c.y)) for c in self.terms.values()), default=0.0)

    def __eq__(self, other):
        if not isinstance(other, FormalSeries):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    __hash__ = None

    # serialization ---------------------------------------------------------
    def to_json(self) -> str:
        rows = []
        for (exps, h), c in sorted(self.terms.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            re, im = c.x, c.y
            rows.append(
                {
                    "exponents": list(exps),
                    "hbar": h,
                    "coeff": [int(re.numerator), int(re.denominator), int(im.numerator), int(im.denominator)],
                }
            )
        return json.dumps({"n": self.n, "K": self.K, "terms": rows})

    @classmethod
    def from_json(cls, text: str) -> "FormalSeries":
        data = json.loads(text)
        terms = {}
        for row in data["terms"]:
            nr, dr, ni, di = row["coeff"]
            terms[(tuple(row["exponents"]), row["hbar"])] = QQ_I(QQ(nr, dr), QQ(ni, di))
        hmin = min([0] + [row["hbar"] for row in data["terms"]])
        return cls(data["n"], terms, data["K"], hmin)

    def __repr__(self):
        names = [f"{s}{i + 1}" for i in range(self.n) for s in "xp"]
        parts = []
        for (exps, h), c in sorted(self.terms.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            mono = "*".join(f"{nm}^{e}" if e > 1 else nm for nm, e in zip(names, exps) if e)
            hb = "" if h == 0 else ("hbar" if h == 1 else f"hbar^{h}")
            factors = [s for s in (mono, hb) if s]
            parts.append(f"({c})" + ("*" + "*".join(factors) if factors else ""))
        return "FormalSeries(" + (" + ".join(parts) or "0") + ")"


# -- bidifferential expansion of pi^j ----------------------------------------------


@dataclass(frozen=True)
class Bidifferential:
    """sum of weight * (d^left (x) d^right) over 2n-variable multi-indices."""

    n: int
    order: int
    terms: tuple[tuple[Exponents, Exponents, Fraction], ...]

    def apply(self, f: FormalSeries, g: FormalSeries) -> FormalSeries:
        """m o B (f (x) g), ignoring hbar gradings of the operator itself."""
        out: dict = {}
        for (e1, h1), c1 in f.terms.items():
            for (e2, h2), c2 in g.terms.items():
                for left, right, weight in self.terms:
                    k1, m1 = _derive(e1, left)
                    if not k1:
                        continue
                    k2, m2 = _derive(e2, right)
                    if not k2:
                        continue
                    key = (tuple(a + b for a, b in zip(m1, m2)), h1 + h2)
                    val = c1 * c2 * gaussian(weight * k1 * k2)
                    out[key] = out[key] + val if key in out else val
        return FormalSeries(f.n, out, min(f.K, g.K), f.hbar_min + g.hbar_min)

    def differential_orders(self) -> set[int]:
        return {sum(l) + sum(r) for l, r, _ in self.terms}


def _derive(exps: Exponents, idx: Exponents) -> tuple[int, Exponents]:
    coeff = 1
    out = []
    for e, d in zip(exps, idx):
        if d > e:
            return 0, exps
        coeff *= math.perm(e, d)
        out.append(e - d)
    return coeff, tuple(out)


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def poisson_power(n: int, j: int) -> Bidifferential:
    """pi^j expanded as a sum of paired partial derivatives.

    pi^j = sum_{|a|+|b|=j} j!/(a! b!) (-1)^|b| (dx^a dp^b) (x) (dp^a dx^b).
    """
    terms = []
    for split in _compositions(j, 2 * n):
        a, b = split[:n], split[n:]
        weight = Fraction(math.factorial(j), math.prod(math.factorial(t) for t in split))
        if sum(b) % 2:
            weight = -weight
        left = tuple(v for i in range(n) for v in (a[i], b[i]))
        right = tuple(v for i in range(n) for v in (b[i], a[i]))
        terms.append((left, right, weight))
    return Bidifferential(n, j, tuple(terms))


@lru_cache(maxsize=None)
def _moyal_factor(j: int):
    # (-i/2)^j / j!
    out = gaussian(Fraction(1, 2 ** j * math.factorial(j)))
    for _ in range(j):
        out = out * -I_UNIT
    return out


@lru_cache(maxsize=200_000)
def _monomial_star(e1: Exponents, e2: Exponents, n: int, jmax: int) -> tuple:
    """Moyal product of two monomials, as ((exponents, j), coefficient) pairs."""
    out: dict = {}
    for j in range(jmax + 1):
        if 2 * j > sum(e1) + sum(e2):
            break
        factor = _moyal_factor(j)
        for left, right, weight in poisson_power(n, j).terms:
            k1, m1 = _derive(e1, left)
            if not k1:
                continue
            k2, m2 = _derive(e2, right)
            if not k2:
                continue
            key = (tuple(a + b for a, b in zip(m1, m2)), j)
            val = factor * gaussian(weight * k1 * k2)
            out[key] = out[key] + val if key in out else val
    return tuple((k, v) for k, v in out.items() if v)


def moyal_product(f: FormalSeries, g: FormalSeries, K: int | None = None) -> FormalSeries:
    """f * g, truncated above hbar^K."""
    f._check(g)
    K = min(f.K, g.K) if K is None else K
    if K < 0:
        raise ValueError("truncation order must be >= 0")
    out: dict = {}
    for (e1, h1), c1 in f.terms.items():
        for (e2, h2), c2 in g.terms.items():
            budget = K - h1 - h2
            if budget < 0:
                continue
            c12 = c1 * c2
            for (exps, j), val in _monomial_star(e1, e2, f.n, budget):
                key = (exps, h1 + h2 + j)
                term = c12 * val
                out[key] = out[key] + term if key in out else term
    return FormalSeries(f.n, out, K, f.hbar_min + g.hbar_min)


def star_commutator(f: FormalSeries, g: FormalSeries, K: int | None = None) -> FormalSeries:
    return moyal_product(f, g, K) - moyal_product(g, f, K)


def associator(f: FormalSeries, g: FormalSeries, h: FormalSeries, K: int | None = None) -> FormalSeries:
    """(f*g)*h - f*(g*h); identically zero for an associative product."""
    K = min(f.K, g.K, h.K) if K is None else K
    return moyal_product(moyal_product(f, g, K), h, K) - moyal_product(f, moyal_product(g, h, K), K)


def star_conjugate(f: FormalSeries) -> FormalSeries:
    """Complex conjugation with hbar real."""
    return f._like({k: _conj(v) for k, v in f.terms.items()})


def poisson_bracket(f: FormalSeries, g: FormalSeries) -> FormalSeries:
    """Flat bracket m o pi (f (x) g)."""
    f._check(g)
    return poisson_power(f.n, 1).apply(f, g)


def lie_action(D: FormalSeries, f: FormalSeries, K: int | None = None) -> FormalSeries:
    """Derivation of W^hbar defined by D in hbar^-1 W^hbar: f -> [D, f]."""
    if D.hbar_min < -1 or any(h < -1 for h in D.hbar_powers()):
        raise ValueError("lie_action accepts hbar powers >= -1 only")
    K = min(D.K, f.K) if K is None else K
    out = star_commutator(D, f, K)
    if any(h < 0 for h in out.hbar_powers()):
        raise ArithmeticError("commutator with hbar^-1 W^hbar left W^hbar")
    return FormalSeries(out.n, out.terms, K, 0)


def series_from_dict(n: int, coeffs: Mapping[tuple, object], K: int = DEFAULT_K) -> FormalSeries:
    """Convenience: {(exponents..., hbar_power): c} with hbar power last."""
    terms = {(tuple(key[:-1]), key[-1]): c for key, c in coeffs.items()}
    hmin = min([0] + [key[-1] for key in coeffs])
    return FormalSeries(n, terms, K, hmin)


def random_series(rng, n: int, degree: int = 4, nterms: int = 4, K: int = DEFAULT_K, max_hbar: int = 1) -> FormalSeries:
    """Sparse random element with small Gaussian-integer-over-small-denominator coefficients."""
    terms = {}
    for _ in range(nterms):
        d = int(rng.integers(0, degree + 1))
        exps = [0] * (2 * n)
        for _ in range(d):
            exps[int(rng.integers(0, 2 * n))] += 1
        h = int(rng.integers(0, max_hbar + 1))
        re = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
        im = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
        terms[(tuple(exps), h)] = QQ_I(QQ(re.numerator, re.denominator), QQ(im.numerator, im.denominator))
    return FormalSeries(n, terms, K)


__all__ = [
    "Bidifferential",
    "FormalSeries",
    "associator",
    "lie_action",
    "moyal_product",
    "poisson_bracket",
    "poisson_power",
    "random_series",
    "series_from_dict",
    "star_commutator",
    "star_conjugate",
]
