"""Cohomology of CP^1, both index formulas, idempotent lifting and the beta = 1 check.

Classes are pairs (degree-0 part, degree-2 part) with Laurent-polynomial
coefficients; the degree-2 generator is sigma = [omega / 2pi] with integral 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Mapping, Sequence

import numpy as np

from . import serial
from .errors import LiftError, SpanError
from .quantize import QuantOperator, partial_trace, quantization_map
from .sections import SectionSpace, make_space
from .sphere import NORTH, ONE, U, V, W, SpherePolynomial, build_grid, canonicalize, integrate

log = logging.getLogger(__name__)

# bott_projector(+1) cuts out a bundle of degree -1 for the chart z = (v + i w)/(1 + u).
# Pinned by the index formula and independently by chern_number(); see tests.
BOTT_ORIENTATION = -1

SPECTRAL_GAP = 0.1
INDEX_TOL = 1e-6


# -- Laurent polynomials --------------------------------------------------------


class Laurent:
    """Finite Laurent polynomial sum_k c_k var^k with exact or float coefficients."""

    __slots__ = ("coeffs", "var")

    def __init__(self, coeffs: Mapping[int, Number] | Number | None = None, var: str = "hbar"):
        if isinstance(coeffs, Number):
            coeffs = {0: coeffs}
        self.coeffs = {int(k): v for k, v in (coeffs or {}).items() if v != 0}
        self.var = var

    def _lift(self, other) -> "Laurent":
        if isinstance(other, Laurent):
            if other.var != self.var and other.coeffs and self.coeffs:
                raise ValueError(f"mixing variables {self.var} and {other.var}")
            return other
        if isinstance(other, Number):
            return Laurent({0: other}, self.var)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return Laurent(out, self.var)

    __radd__ = __add__

    def __neg__(self):
        return Laurent({k: -v for k, v in self.coeffs.items()}, self.var)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out: dict[int, Number] = {}
        for a, x in self.coeffs.items():
            for b, y in other.coeffs.items():
                out[a + b] = out.get(a + b, 0) + x * y
        return Laurent(out, self.var)

    __rmul__ = __mul__

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self.coeffs == other.coeffs

    __hash__ = None

    def __getitem__(self, k: int):
        return self.coeffs.get(k, 0)

    def __call__(self, value):
        return sum(c * value ** k for k, c in self.coeffs.items())

    def powers(self) -> list[int]:
        return sorted(self.coeffs)

    def invert_variable(self, var: str) -> "Laurent":
        """Substitute var_old = 1/var_new (e.g. hbar^-1 -> N)."""
        return Laurent({-k: c for k, c in self.coeffs.items()}, var)

    def max_abs_difference(self, other: "Laurent") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(complex(self[k]) - complex(other[k])) for k in keys), default=0.0)

    def to_dict(self) -> dict[str, Number]:
        def label(k):
            if k == 0:
                return "1"
            if k == 1:
                return self.var
            return f"{self.var}^{k}"

        def value(c):
            if isinstance(c, Fraction) and c.denominator == 1:
                return int(c)
            if isinstance(c, Fraction):
                return float(c)
            return c

        return {label(k): value(self.coeffs[k]) for k in sorted(self.coeffs)}

    def __repr__(self):
        return f"Laurent({self.to_dict()})"


# -- cohomology ring of CP^1 ---------------------------------------------------------


@dataclass(frozen=True)
class CohoClass:
    deg0: Laurent
    deg2: Laurent

    @classmethod
    def of(cls, deg0=0, deg2=0, var: str = "hbar") -> "CohoClass":
        as_l = lambda c: c if isinstance(c, Laurent) else Laurent(c, var)
        return cls(as_l(deg0), as_l(deg2))

    def __add__(self, other: "CohoClass") -> "CohoClass":
        return CohoClass(self.deg0 + other.deg0, self.deg2 + other.deg2)

    def __mul__(self, other: "CohoClass") -> "CohoClass":
        # sigma^2 = 0 on CP^1
        return CohoClass(self.deg0 * other.deg0, self.deg0 * other.deg2 + self.deg2 * other.deg0)

    def __eq__(self, other):
        return self.deg0 == other.deg0 and self.deg2 == other.deg2

    def exp(self) -> "CohoClass":
        """e^(a + b sigma) = e^a (1 + b sigma); only nilpotent classes (a = 0) are supported."""
        if self.deg0.coeffs:
            raise ValueError("exp of a class with nonzero degree-0 part is not a Laurent polynomial")
        return CohoClass(Laurent(1, self.deg2.var), self.deg2)

    def integrate(self) -> Laurent:
        return self.deg2


def sigma(var: str = "hbar") -> CohoClass:
    return CohoClass.of(0, 1, var)


def unit(var: str = "hbar") -> CohoClass:
    return CohoClass.of(1, 0, var)


def c1_tangent(var: str = "hbar") -> CohoClass:
    """c_1(T CP^1) = 2 sigma (Euler characteristic 2)."""
    return CohoClass.of(0, 2, var)


def todd_cp1(var: str = "hbar") -> CohoClass:
    """Td(T CP^1) = 1 + c_1/2 = 1 + sigma."""
    return unit(var) + CohoClass.of(Fraction(1, 2), 0, var) * c1_tangent(var)


def a_hat_cp1(var: str = "hbar") -> CohoClass:
    # A-hat only has components in degrees divisible by 4.
    return unit(var)


def theta_class(k0: int) -> CohoClass:
    """[omega]/(2 pi hbar) + c_1(L0) + c_1(TM)/2 for L0 = O(k0)."""
    omega_term = CohoClass.of(0, Laurent({-1: 1}))
    return omega_term + CohoClass.of(0, k0) + CohoClass.of(Fraction(1, 2), 0) * c1_tangent()


@dataclass(frozen=True)
class CharacterData:
    rank: int
    degree: int

    def chern_character(self, var: str = "hbar") -> CohoClass:
        return CohoClass.of(self.rank, self.degree, var)


def gq_index_polynomial(ch: CharacterData, k0: int) -> Laurent:
    """int ch(e) Td(TM) exp(c_1(L0) + N sigma), as a polynomial in N."""
    twist = CohoClass.of(0, Laurent({0: k0, 1: 1}, "N"), "N").exp()
    return (ch.chern_character("N") * todd_cp1("N") * twist).integrate()


def formal_index(ch: CharacterData, theta: CohoClass) -> Laurent:
    """int ch(e) A-hat(TM) exp(theta), a Laurent polynomial in hbar."""
    if theta.deg0.coeffs:
        raise ValueError("theta must have vanishing degree-0 part")
    return (ch.chern_character() * a_hat_cp1() * theta.exp()).integrate()


# -- classical idempotents ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassicalIdempotent:
    entries: tuple[tuple[SpherePolynomial, ...], ...]
    label: str = ""
    known_character: CharacterData | None = field(default=None, compare=False)

    def __post_init__(self):
        m = len(self.entries)
        if any(len(row) != m for row in self.entries):
            raise ValueError("idempotent must be a square matrix")
        rows = tuple(tuple(canonicalize(SpherePolynomial._lift(p)) for p in row) for row in self.entries)
        object.__setattr__(self, "entries", rows)

    @property
    def m(self) -> int:
        return len(self.entries)

    def square(self) -> tuple[tuple[SpherePolynomial, ...], ...]:
        m = self.m
        return tuple(
            tuple(
                sum((self.entries[i][k] * self.entries[k][j] for k in range(m)), SpherePolynomial())
                for j in range(m)
            )
            for i in range(m)
        )

    def is_idempotent(self) -> bool:
        sq = self.square()
        return all(sq[i][j] == self.entries[i][j] for i in range(self.m) for j in range(self.m))

    def is_hermitian(self) -> bool:
        return all(
            self.entries[i][j] == self.entries[j][i].conj() for i in range(self.m) for j in range(self.m)
        )

    def trace(self) -> SpherePolynomial:
        return sum((self.entries[i][i] for i in range(self.m)), SpherePolynomial())


def trivial_idempotent(rank: int) -> ClassicalIdempotent:
    if rank < 1:
        raise ValueError("use zero_idempotent for rank 0")
    entries = tuple(tuple(ONE if i == j else SpherePolynomial() for j in range(rank)) for i in range(rank))
    return ClassicalIdempotent(entries, f"trivial{rank}", CharacterData(rank, 0))


def zero_idempotent(m: int = 1) -> ClassicalIdempotent:
    entries = tuple(tuple(SpherePolynomial() for _ in range(m)) for _ in range(m))
    return ClassicalIdempotent(entries, f"zero{m}", CharacterData(0, 0))


def bott_projector(k: int) -> ClassicalIdempotent:
    """(1 + k (u sigma_3 + v sigma_1 + w sigma_2)) / 2 for k = +1 or -1."""
    if k not in (1, -1):
        raise ValueError("bott_projector supports k = +1 or -1 only")
    h = Fraction(1, 2)
    entries = (
        (ONE * h + U * (k * h), (V - W * 1j) * (k * h)),
        ((V + W * 1j) * (k * h), ONE * h - U * (k * h)),
    )
    return ClassicalIdempotent(entries, f"bott{k:+d}", CharacterData(1, BOTT_ORIENTATION * k))


def chern_number(e: ClassicalIdempotent) -> float:
    """Chern-Weil degree (i / 2pi) int tr(e de de) of the bundle Im e.

    On the sphere dx_i ^ dx_j = eps_ijk x_k dA, so the integrand is the
    polynomial 2 i sum eps_ijk x_k tr(e d_i e d_j e) against omega / 2pi.
    """
    m = e.m
    coords = (U, V, W)
    grads = [[[e.entries[a][b].diff(i) for b in range(m)] for a in range(m)] for i in range(3)]
    eps = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}
    integrand = SpherePolynomial()
    for (i, j, k), s in eps.items():
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    term = e.entries[a][b] * grads[i][b][c] * grads[j][c][a] * coords[k]
                    integrand = integrand + term * s
    integrand = integrand * 2j
    value = integrate(build_grid(max(integrand.degree, 1)), integrand)
    return float(value.real)


def character(e: ClassicalIdempotent) -> CharacterData:
    if e.known_character is not None:
        return e.known_character
    tr = e.trace()
    if tr.degree > 0:
        raise ValueError("pointwise trace of an idempotent must be constant on connected M")
    rank = int(round(tr(NORTH).real))
    return CharacterData(rank, int(round(chern_number(e))))


# -- quantization of idempotents -------------------------------------------------


def quantize_matrix(space: SectionSpace, e: ClassicalIdempotent, map_kind: str = "toeplitz", grid=None) -> QuantOperator:
    qmap = quantization_map(map_kind)
    d = space.dim
    big = np.zeros((e.m * d, e.m * d), dtype=complex)
    for a in range(e.m):
        for b in range(e.m):
            p = e.entries[a][b]
            if canonicalize(p).degree < 0:
                continue
            big[a * d:(a + 1) * d, b * d:(b + 1) * d] = qmap(space, p, grid).matrix
    return QuantOperator(space, big, e.m)


def idempotent_residual(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x @ x - x, 2))


def spectral_gap(a: np.ndarray) -> float:
    """Distance from 1/2 to the spectrum of a."""
    if a.size == 0:
        return np.inf
    if np.allclose(a, a.conj().T, atol=1e-13, rtol=0):
        ev = np.linalg.eigvalsh((a + a.conj().T) / 2)
    else:
        ev = np.linalg.eigvals(a)
    return float(np.min(np.abs(ev - 0.5)))


def newton_idempotent(
    a: np.ndarray, tol: float = 1e-13, accept: float = 1e-12, max_iter: int = 30
) -> tuple[np.ndarray, list[float]]:
    """Iterate x <- 3x^2 - 2x^3 from x = a; returns (limit, residual history).

    The fixed points are the idempotents; each eigenvalue flows to 0 or 1
    according to which side of 1/2 it starts on, so the limit equals the
    Riesz projection, the contour integral of (zeta - a)^-1 / 2pi i around the
    eigenvalues above 1/2. Stops at ``tol`` or once roundoff stalls progress;
    a final ||x^2 - x|| above ``accept`` is an error.
    """
    x = np.array(a, dtype=complex)
    history = [idempotent_residual(x)]
    for _ in range(max_iter):
        if history[-1] <= tol:
            break
        x2 = x @ x
        nxt = 3 * x2 - 2 * x2 @ x
        r = idempotent_residual(nxt)
        if r >= history[-1] and history[-1] <= accept:
            break
        x = nxt
        history.append(r)
    if history[-1] > accept:
        raise LiftError(f"Newton iteration did not converge: residual {history[-1]:.3e}")
    return x, history


def lift_idempotent(
    space: SectionSpace,
    e: ClassicalIdempotent,
    grid=None,
    map_kind: str = "toeplitz",
    delta: float = SPECTRAL_GAP,
) -> QuantOperator:
    """Idempotent in M_m(A_N) close to the entrywise quantization of e."""
    a = quantize_matrix(space, e, map_kind, grid)
    gap = spectral_gap(a.matrix)
    if gap < delta:
        raise LiftError(
            f"spectral gap {gap:.4f} < {delta} at N={space.N}, k0={space.k0}; N too small", gap
        )
    x, history = newton_idempotent(a.matrix)
    log.debug("lift N=%d k0=%d %s: residuals %s", space.N, space.k0, e.label, history)
    return QuantOperator(space, x, e.m)


@dataclass(frozen=True)
class IndexReport:
    N: int
    k0: int
    idempotent: str
    measured_trace: float
    predicted: int
    residual: float
    idempotent_residual: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "inputs": {"N": self.N, "k0": self.k0, "idempotent": self.idempotent},
            "measured": self.measured_trace,
            "predicted": self.predicted,
            "residual": self.residual,
            "idempotent_residual": self.idempotent_residual,
            "pass": self.passed,
        }


def index_check(N: int, k0: int, e: ClassicalIdempotent, map_kind: str = "toeplitz", tol: float = INDEX_TOL) -> IndexReport:
    space = make_space(N, k0)
    lifted = lift_idempotent(space, e, map_kind=map_kind)
    measured = partial_trace(lifted)
    predicted = gq_index_polynomial(character(e), k0)(N)
    predicted = int(predicted)
    resid = abs(measured - predicted)
    return IndexReport(
        N, k0, e.label, float(measured.real), predicted, float(resid),
        idempotent_residual(lifted.matrix), bool(resid <= tol),
    )


@dataclass
class BetaReport:
    k0: int
    levels: tuple[int, ...]
    traces: dict[str, list[float]]
    fitted: dict[str, Laurent]
    predicted: dict[str, Laurent]
    fit_residual: dict[str, float]
    beta: Laurent
    theta_deg2: Laurent
    max_difference: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "inputs": {"k0": self.k0, "levels": list(self.levels), "idempotents": list(self.traces)},
            "measured": {name: self.fitted[name].to_dict() for name in self.traces},
            "predicted": {name: self.predicted[name].to_dict() for name in self.traces},
            "fit_residual": self.fit_residual,
            "beta": self.beta.to_dict(),
            "theta_deg2": self.theta_deg2.to_dict(),
            "residual": self.max_difference,
            "pass": self.passed,
        }


def _round_laurent(l: Laurent, digits: int = 9) -> Laurent:
    return Laurent({k: round(float(np.real(v)), digits) + 0.0 for k, v in l.coeffs.items()}, l.var)


def beta_check(
    levels: Sequence[int],
    k0: int,
    idempotents: Sequence[ClassicalIdempotent],
    map_kind: str = "toeplitz",
    tol: float = INDEX_TOL,
) -> BetaReport:
    """Compare the exact-in-N trace polynomials with the formal index at hbar = 1/N.

    Besides coefficientwise agreement with theta_class(k0), the report solves
    beta * (rank * theta_2 + degree) = fitted trace for the unknowns beta and
    beta * theta_2, which needs the characters to span H^0 + H^2.
    """
    chars = [character(e) for e in idempotents]
    span = np.array([[c.rank, c.degree] for c in chars], dtype=float)
    if len(chars) < 2 or np.linalg.matrix_rank(span) < 2:
        raise SpanError("idempotent characters do not span H^0 + H^2")
    if len(levels) < 2:
        raise ValueError("beta_check needs at least two levels")

    theta = theta_class(k0)
    Ns = np.asarray(levels, dtype=float)
    design = np.stack([Ns, np.ones_like(Ns)], axis=1)
    traces, fitted, predicted, resid = {}, {}, {}, {}
    rows = []
    for e, ch in zip(idempotents, chars):
        tr = []
        for N in levels:
            lifted = lift_idempotent(make_space(N, k0), e, map_kind=map_kind)
            tr.append(float(partial_trace(lifted).real))
        coef, *_ = np.linalg.lstsq(design, np.asarray(tr), rcond=None)
        resid[e.label] = float(np.max(np.abs(design @ coef - tr)))
        in_n = Laurent({1: float(coef[0]), 0: float(coef[1])}, "N")
        fitted[e.label] = _round_laurent(in_n.invert_variable("hbar"))
        predicted[e.label] = formal_index(ch, theta)
        traces[e.label] = tr
        rows.append((ch, in_n.invert_variable("hbar")))

    # beta * theta2 * rank + beta * degree = P, per Laurent power.
    powers = sorted({k for _, p in rows for k in p.coeffs} | {0})
    A = span
    beta, btheta = {}, {}
    for k in powers:
        rhs = np.array([p[k] for _, p in rows], dtype=float)
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        btheta[k], beta[k] = sol
    beta_l = _round_laurent(Laurent(beta))
    # beta is a constant when the check passes, so theta_2 = (beta theta_2) / beta_0.
    b0 = beta.get(0, 0.0)
    theta2 = _round_laurent(Laurent({k: v / b0 for k, v in btheta.items()})) if b0 else Laurent()

    diff = max(fitted[name].max_abs_difference(predicted[name]) for name in fitted)
    diff = max([diff] + list(resid.values()))
    return BetaReport(
        k0, tuple(levels), traces, fitted, predicted, resid, beta_l, theta2, float(diff), bool(diff <= tol)
    )


def named_idempotent(name: str) -> ClassicalIdempotent:
    """trivial1, trivial2, ..., bott+1, bott-1, zero."""
    if name.startswith("trivial"):
        return trivial_idempotent(int(name[len("trivial"):] or 1))
    if name in ("bott+1", "bott1"):
        return bott_projector(1)
    if name == "bott-1":
        return bott_projector(-1)
    if name == "zero":
        return zero_idempotent(1)
    raise ValueError(f"unknown idempotent {name!r}")


def report_json(obj) -> str:
    return serial.dumps(obj, sort_keys=True)
