"""Classical geometry of the sphere CP^1.

Conventions (used everywhere in the package):

==================  =====================================================
embedding           (u, v, w) on the unit sphere, u^2 + v^2 + w^2 = 1
affine chart        z = (v + i w) / (1 + u);  z = 0 is the pole u = 1
symplectic form     omega = i dz ^ dzbar / (1 + |z|^2)^2, total area 2*pi
normalized measure  omega / 2pi, total mass 1 (uniform on the sphere)
Poisson bracket     {u, v} = 2w, {v, w} = 2u, {w, u} = 2v
Laplacian           nonnegative spectrum, Delta u = 4u (twice the round one)
==================  =====================================================

Observables are polynomials in (u, v, w) reduced modulo the sphere relation.
The canonical representative eliminates u^2 via u^2 = 1 - v^2 - w^2, so every
canonical monomial has u-exponent 0 or 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Number
from typing import Mapping

import numpy as np

from . import serial
from .errors import ConfigurationError, QuadratureError

Monomial = tuple[int, int, int]

_POINT_TOL = 1e-12


@dataclass(frozen=True)
class SpherePoint:
    u: float
    v: float
    w: float

    def __post_init__(self):
        r2 = self.u * self.u + self.v * self.v + self.w * self.w
        if abs(r2 - 1.0) > _POINT_TOL:
            raise ValueError(f"point ({self.u}, {self.v}, {self.w}) is off the unit sphere")

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "SpherePoint":
        """Polar angle theta measured from the pole u = 1, azimuth phi in the (v, w) plane."""
        s = math.sin(theta)
        return cls(math.cos(theta), s * math.cos(phi), s * math.sin(phi))

    @classmethod
    def from_chart(cls, z: complex) -> "SpherePoint":
        r2 = abs(z) ** 2
        d = 1.0 + r2
        return cls((1.0 - r2) / d, 2.0 * z.real / d, 2.0 * z.imag / d)

    @property
    def theta(self) -> float:
        return math.atan2(math.hypot(self.v, self.w), self.u)

    @property
    def phi(self) -> float:
        return math.atan2(self.w, self.v)

    def chart(self) -> complex:
        """Affine coordinate z; infinite at the pole u = -1."""
        if self.u <= -1.0:
            return complex(math.inf, 0.0)
        return complex(self.v, self.w) / (1.0 + self.u)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])


NORTH = SpherePoint(1.0, 0.0, 0.0)
SOUTH = SpherePoint(-1.0, 0.0, 0.0)


# -- polynomials ---------------------------------------------------------------


def _is_zero(c) -> bool:
    return c == 0


@lru_cache(maxsize=None)
def _reduce_monomial(m: Monomial) -> tuple[tuple[Monomial, int], ...]:
    a, b, c = m
    if a < 2:
        return ((m, 1),)
    out: dict[Monomial, int] = {}
    for sub, sign in (((a - 2, b, c), 1), ((a - 2, b + 2, c), -1), ((a - 2, b, c + 2), -1)):
        for mono, coeff in _reduce_monomial(sub):
            out[mono] = out.get(mono, 0) + sign * coeff
    return tuple((k, v) for k, v in out.items() if v != 0)


class SpherePolynomial:
    """Polynomial in (u, v, w), viewed as a function on the sphere.

    Coefficients may be any Python numbers; ints and Fractions keep every
    algebraic operation exact. Arithmetic always returns canonical forms.
    """

    __slots__ = ("_coeffs", "canonical")

    def __init__(self, coeffs: Mapping[Monomial, Number] | None = None, canonical: bool = False):
        items = {}
        for mono, c in (coeffs or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != 3 or min(mono) < 0:
                raise ValueError(f"bad monomial exponent {mono}")
            if not _is_zero(c):
                items[mono] = items.get(mono, 0) + c
        self._coeffs = {k: v for k, v in items.items() if not _is_zero(v)}
        self.canonical = canonical

    # construction ----------------------------------------------------------
    @classmethod
    def constant(cls, c) -> "SpherePolynomial":
        return cls({(0, 0, 0): c}, canonical=True)

    @classmethod
    def generator(cls, name: str) -> "SpherePolynomial":
        mono = {"u": (1, 0, 0), "v": (0, 1, 0), "w": (0, 0, 1)}[name]
        return cls({mono: 1}, canonical=True)

    @property
    def coeffs(self) -> dict[Monomial, Number]:
        return dict(self._coeffs)

    def items(self):
        return sorted(self._coeffs.items())

    def __iter__(self):
        return iter(self.items())

    @property
    def degree(self) -> int:
        """Total degree of the stored representative (-1 for the zero polynomial)."""
        return max((sum(m) for m in self._coeffs), default=-1)

    def is_zero(self) -> bool:
        return not canonicalize(self)._coeffs

    # arithmetic ------------------------------------------------------------
    @staticmethod
    def _lift(other) -> "SpherePolynomial":
        if isinstance(other, SpherePolynomial):
            return other
        if isinstance(other, Number):
            return SpherePolynomial.constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self._coeffs)
        for k, v in other._coeffs.items():
            out[k] = out.get(k, 0) + v
        return canonicalize(SpherePolynomial(out))

    __radd__ = __add__

    def __neg__(self):
        return SpherePolynomial({k: -v for k, v in self._coeffs.items()}, self.canonical)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return canonicalize(SpherePolynomial({k: v * other for k, v in self._coeffs.items()}))
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, Number] = {}
        for (a1, b1, c1), x in self._coeffs.items():
            for (a2, b2, c2), y in other._coeffs.items():
                key = (a1 + a2, b1 + b2, c1 + c2)
                out[key] = out.get(key, 0) + x * y
        return canonicalize(SpherePolynomial(out))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Number):
            return NotImplemented
        if isinstance(other, int):
            other = Fraction(other)
        return self * (1 / other)

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        out = SpherePolynomial.constant(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return canonicalize(self)._coeffs == canonicalize(other)._coeffs

    __hash__ = None

    def conj(self) -> "SpherePolynomial":
        return SpherePolynomial(
            {k: (v.conjugate() if isinstance(v, complex) else v) for k, v in self._coeffs.items()},
            self.canonical,
        )

    def is_real(self) -> bool:
        return all(not isinstance(v, complex) or v.imag == 0 for v in self._coeffs.values())

    def diff(self, var: int) -> "SpherePolynomial":
        """Partial derivative of the stored representative in the ambient coordinate ``var``.

        The result is not a function on the sphere in its own right; it is only
        meaningful inside the bracket and Laplacian formulas below.
        """
        out: dict[Monomial, Number] = {}
        for mono, c in self._coeffs.items():
            e = mono[var]
            if e:
                m = list(mono)
                m[var] -= 1
                out[tuple(m)] = out.get(tuple(m), 0) + e * c
        return SpherePolynomial(out)

    def _raw_mul(self, other: "SpherePolynomial") -> "SpherePolynomial":
        out: dict[Monomial, Number] = {}
        for (a1, b1, c1), x in self._coeffs.items():
            for (a2, b2, c2), y in other._coeffs.items():
                key = (a1 + a2, b1 + b2, c1 + c2)
                out[key] = out.get(key, 0) + x * y
        return SpherePolynomial(out)

    def _raw_add(self, other: "SpherePolynomial", scale=1) -> "SpherePolynomial":
        out = dict(self._coeffs)
        for k, v in other._coeffs.items():
            out[k] = out.get(k, 0) + scale * v
        return SpherePolynomial(out)

    def homogeneous_parts(self) -> dict[int, "SpherePolynomial"]:
        parts: dict[int, dict] = {}
        for mono, c in self._coeffs.items():
            parts.setdefault(sum(mono), {})[mono] = c
        return {d: SpherePolynomial(p) for d, p in parts.items()}

    def substitute(self, u, v, w) -> "SpherePolynomial":
        """Compose with polynomial maps: returns p(u(x), v(x), w(x))."""
        out = SpherePolynomial()
        for (a, b, c), coeff in self._coeffs.items():
            out = out + (u ** a) * (v ** b) * (w ** c) * coeff
        return out

    # evaluation ------------------------------------------------------------
    def evaluate(self, u, v, w):
        """Vectorized evaluation at arrays of embedding coordinates."""
        u, v, w = (np.asarray(t, dtype=float) for t in (u, v, w))
        total = np.zeros(np.broadcast(u, v, w).shape, dtype=complex)
        for (a, b, c), coeff in self._coeffs.items():
            total = total + complex(coeff) * u ** a * v ** b * w ** c
        return total

    def __call__(self, x: SpherePoint) -> complex:
        return complex(self.evaluate(x.u, x.v, x.w))

    # serialization ---------------------------------------------------------
    def to_json(self) -> str:
        data = {
            f"{a},{b},{c}": [float(complex(x).real), float(complex(x).imag)]
            for (a, b, c), x in self.items()
        }
        return serial.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpherePolynomial":
        data = json.loads(text)
        coeffs = {}
        for key, (re, im) in data.items():
            mono = tuple(int(s) for s in key.split(","))
            coeffs[mono] = complex(re, im) if im else float(re)
        return canonicalize(cls(coeffs))

    def __repr__(self):
        if not self._coeffs:
            return "SpherePolynomial(0)"
        terms = []
        for (a, b, c), x in self.items():
            mono = "*".join(f"{n}^{e}" if e > 1 else n for n, e in zip("uvw", (a, b, c)) if e)
            terms.append(f"{x}*{mono}" if mono else f"{x}")
        return "SpherePolynomial(" + " + ".join(terms) + ")"


U = SpherePolynomial.generator("u")
V = SpherePolynomial.generator("v")
W = SpherePolynomial.generator("w")
ONE = SpherePolynomial.constant(1)


def canonicalize(p: SpherePolynomial) -> SpherePolynomial:
    """Canonical representative modulo u^2 + v^2 + w^2 - 1."""
    if p.canonical:
        return p
    out: dict[Monomial, Number] = {}
    for mono, c in p._coeffs.items():
        for red, k in _reduce_monomial(mono):
            out[red] = out.get(red, 0) + k * c
    return SpherePolynomial(out, canonical=True)


def poisson_bracket(f: SpherePolynomial, g: SpherePolynomial) -> SpherePolynomial:
    """{f, g} = 2 x . (grad F x grad G) evaluated on the sphere."""
    fu, fv, fw = (f.diff(i) for i in range(3))
    gu, gv, gw = (g.diff(i) for i in range(3))
    cross_u = fv._raw_mul(gw)._raw_add(fw._raw_mul(gv), -1)
    cross_v = fw._raw_mul(gu)._raw_add(fu._raw_mul(gw), -1)
    cross_w = fu._raw_mul(gv)._raw_add(fv._raw_mul(gu), -1)
    total = U._raw_mul(cross_u)._raw_add(V._raw_mul(cross_v))._raw_add(W._raw_mul(cross_w))
    return canonicalize(total) * 2


def laplacian(f: SpherePolynomial) -> SpherePolynomial:
    # For F homogeneous of degree d: Delta_round(F|S) = d(d+1) F - Delta_R3 F on r = 1.
    total = SpherePolynomial()
    for d, part in f.homogeneous_parts().items():
        flat = part.diff(0).diff(0)._raw_add(part.diff(1).diff(1))._raw_add(part.diff(2).diff(2))
        total = total._raw_add(part, d * (d + 1))._raw_add(flat, -1)
    return canonicalize(total) * 2


# -- chart representation --------------------------------------------------------


@dataclass(frozen=True)
class ChartForm:
    """p(u, v, w) written as numerator(z, zbar) / (1 + |z|^2)^degree.

    ``numerator`` maps (p, q) to the coefficient of z^p zbar^q.
    """

    numerator: Mapping[tuple[int, int], complex]
    degree: int

    def evaluate(self, z: complex) -> complex:
        zb = z.conjugate()
        num = sum(c * z ** p * zb ** q for (p, q), c in self.numerator.items())
        return num / (1.0 + abs(z) ** 2) ** self.degree


def _zpoly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (p1, q1), x in a.items():
        for (p2, q2), y in b.items():
            key = (p1 + p2, q1 + q2)
            out[key] = out.get(key, 0) + x * y
    return out


def _zpoly_pow(a: dict, n: int) -> dict:
    out = {(0, 0): 1}
    for _ in range(n):
        out = _zpoly_mul(out, a)
    return out


def to_chart(f: SpherePolynomial) -> ChartForm:
    # u = (1 - z zb)/(1 + z zb), v = (z + zb)/(1 + z zb), w = -i (z - zb)/(1 + z zb)
    u_num = {(0, 0): 1, (1, 1): -1}
    v_num = {(1, 0): 1, (0, 1): 1}
    w_num = {(1, 0): -1j, (0, 1): 1j}
    den = {(0, 0): 1, (1, 1): 1}
    d = max(f.degree, 0)
    num: dict = {}
    for (a, b, c), coeff in f.items():
        term = _zpoly_mul(_zpoly_mul(_zpoly_pow(u_num, a), _zpoly_pow(v_num, b)), _zpoly_pow(w_num, c))
        term = _zpoly_mul(term, _zpoly_pow(den, d - a - b - c))
        for k, x in term.items():
            num[k] = num.get(k, 0) + coeff * x
    return ChartForm({k: complex(v) for k, v in num.items() if v != 0}, d)


# -- quadrature --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Product grid: Gauss-Legendre in u = cos(theta), uniform in azimuth.

    Weights sum to one, i.e. the grid integrates against omega / 2pi.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    exactness: int
    shape: tuple[int, int] = field(default=(0, 0))

    @property
    def nodes(self) -> list[SpherePoint]:
        return [SpherePoint(*x) for x in zip(self.u, self.v, self.w)]

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=64)
def build_grid(order: int) -> QuadratureGrid:
    if int(order) != order or order < 1:
        raise ConfigurationError(f"quadrature order must be a positive integer, got {order!r}")
    order = int(order)
    n_theta = order // 2 + 1  # 2 n - 1 >= order
    n_phi = order + 1  # resolves azimuthal frequencies |m| <= order
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    cos_t, az = np.meshgrid(x, phi, indexing="ij")
    weights = np.outer(wx / 2.0, np.full(n_phi, 1.0 / n_phi))
    sin_t = np.sqrt(1.0 - cos_t ** 2)
    arrays = [
        cos_t.ravel(),
        (sin_t * np.cos(az)).ravel(),
        (sin_t * np.sin(az)).ravel(),
        np.arccos(cos_t).ravel(),
        az.ravel(),
        weights.ravel(),
    ]
    for a in arrays:
        a.setflags(write=False)
    return QuadratureGrid(*arrays, exactness=min(2 * n_theta - 1, n_phi - 1), shape=(n_theta, n_phi))


def integrate(grid: QuadratureGrid, f: SpherePolynomial) -> complex:
    """Integral of f against omega / 2pi; exact up to roundoff for in-degree f."""
    f = canonicalize(f)
    if f.degree > grid.exactness:
        raise QuadratureError(
            f"polynomial degree {f.degree} exceeds grid exactness {grid.exactness}"
        )
    return complex(np.dot(grid.weights, f.evaluate(grid.u, grid.v, grid.w)))


def fibonacci_points(samples: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic quasi-uniform point set on the sphere."""
    i = np.arange(samples)
    u = 1.0 - (2.0 * i + 1.0) / samples
    golden = math.pi * (3.0 - math.sqrt(5.0))
    phi = golden * i
    s = np.sqrt(1.0 - u ** 2)
    return u, s * np.cos(phi), s * np.sin(phi)


def sup_norm(f: SpherePolynomial, samples: int = 10_000) -> float:
    """Max |f| over a Fibonacci lattice; a lower bound on the true sup-norm."""
    if samples < 100:
        raise ConfigurationError("sup_norm needs at least 100 samples")
    return float(np.max(np.abs(f.evaluate(*fibonacci_points(samples)))))
