"""Level scans, inverse-power fits, and the norm defects of the star product.

The semiclassical parameter is identified with the level: hbar = 1/N.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import serial
from .errors import ConventionError, FitError
from .quantize import operator_norm, quantization_map, symbol, toeplitz
from .sections import make_space
from .sphere import SpherePoint, SpherePolynomial, canonicalize, poisson_bracket

DEFAULT_LEVELS = (8, 16, 32, 64)

# +1: the defect N [T f, T g] + i T{f, g}; -1 flips the sign of the bracket term.
COMMUTATOR_SIGN = +1


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("BTQ_THREADS", "1")))
    except ValueError:
        return 1


def map_levels(fn: Callable[[int], object], levels: Sequence[int], workers: int | None = None) -> list:
    """Evaluate fn at every level, results ordered as ``levels``."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(levels) <= 1:
        return [fn(N) for N in levels]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, levels))


@dataclass(frozen=True)
class LevelScan:
    levels: tuple[int, ...]
    values: tuple[complex, ...]
    descriptor: str = ""

    def __post_init__(self):
        levels = tuple(int(N) for N in self.levels)
        if len(levels) != len(self.values):
            raise ValueError("levels and values differ in length")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", tuple(self.values))

    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    def strictly_decreasing(self) -> bool:
        vals = np.real(self.array())
        return bool(np.all(np.diff(vals) < 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["N", "value_re", "value_im"])
        for N, val in zip(self.levels, self.values):
            val = complex(val)
            writer.writerow([N, format(val.real, ".17g"), format(val.imag, ".17g")])
        return buf.getvalue()


@dataclass(frozen=True)
class PowerFit:
    """Least-squares fit value(N) ~ sum_j c_j N^-j."""

    coefficients: tuple[complex, ...]
    max_residual: float
    order: int
    levels: tuple[int, ...] = field(default=())

    def __call__(self, N: float) -> complex:
        return sum(c * float(N) ** -j for j, c in enumerate(self.coefficients))

    def to_json(self) -> str:
        def enc(c):
            c = complex(c)
            return [c.real, c.imag]

        return serial.dumps(
            {
                "coefficients": [enc(c) for c in self.coefficients],
                "residual": self.max_residual,
                "levels": list(self.levels),
            }
        )


def fit_inverse_powers(scan: LevelScan, k: int) -> PowerFit:
    levels = np.asarray(scan.levels, dtype=float)
    if k < 0:
        raise FitError("fit order must be nonnegative")
    if len(levels) < k + 2:
        raise FitError(f"need at least {k + 2} levels for an order-{k} fit, got {len(levels)}")
    vander = levels[:, None] ** -np.arange(k + 1)[None, :]
    if np.linalg.matrix_rank(vander) < k + 1:
        raise FitError("rank-deficient Vandermonde system (duplicate levels?)")
    values = scan.array()
    if not np.iscomplexobj(values) or np.all(np.imag(values) == 0):
        values = np.real(values).astype(float)
    coef, *_ = np.linalg.lstsq(vander, values, rcond=None)
    resid = float(np.max(np.abs(vander @ coef - values)))
    if np.isrealobj(coef):
        coeffs = tuple(float(c) for c in coef)
    else:
        coeffs = tuple(complex(c) for c in coef)
    return PowerFit(coeffs, resid, k, scan.levels)


def _quantize(f, N, k0, map_kind):
    return quantization_map(map_kind)(make_space(N, k0), f)


def commutator_defect(
    f: SpherePolynomial,
    g: SpherePolynomial,
    N: int,
    map_kind: str = "toeplitz",
    k0: int = 0,
    sign: int = COMMUTATOR_SIGN,
) -> float:
    """|| N [Q(f), Q(g)] + sign * i Q({f, g}) || at level N."""
    qf, qg = _quantize(f, N, k0, map_kind), _quantize(g, N, k0, map_kind)
    qb = _quantize(poisson_bracket(f, g), N, k0, map_kind)
    comm = qf.matrix @ qg.matrix - qg.matrix @ qf.matrix
    return float(np.linalg.norm(N * comm + sign * 1j * qb.matrix, 2))


def commutator_scan(f, g, levels=DEFAULT_LEVELS, map_kind="toeplitz", k0=0, sign=COMMUTATOR_SIGN) -> LevelScan:
    vals = map_levels(lambda N: commutator_defect(f, g, N, map_kind, k0, sign), levels)
    return LevelScan(tuple(levels), tuple(vals), f"commutator-defect[{map_kind},sign={sign:+d}]")


def decays(scan: LevelScan, limit_tol: float = 0.02) -> bool:
    """Strictly decreasing and extrapolating to (nearly) zero."""
    fit = fit_inverse_powers(scan, min(2, len(scan.levels) - 2))
    return scan.strictly_decreasing() and abs(fit.coefficients[0]) <= limit_tol


def sign_audit(f, g, levels=DEFAULT_LEVELS, map_kind="toeplitz", k0=0) -> dict:
    """Check that exactly the configured bracket sign gives a decaying defect.

    Raises ConventionError if the measurement contradicts ``COMMUTATOR_SIGN``.
    """
    result = {}
    for sign in (+1, -1):
        scan = commutator_scan(f, g, levels, map_kind, k0, sign)
        result[sign] = decays(scan)
    if not result[COMMUTATOR_SIGN] or result[-COMMUTATOR_SIGN]:
        raise ConventionError(f"commutator sign audit failed: decay by sign = {result}")
    return result


def star_defect(
    f: SpherePolynomial,
    g: SpherePolynomial,
    phis: Sequence[SpherePolynomial],
    k: int,
    N: int,
    map_kind: str = "geometric",
    k0: int = 0,
) -> float:
    """|| N^k Q(f) Q(g) - sum_{j<=k} (-i)^j N^(k-j) Q(phi_j) || at level N."""
    if len(phis) != k + 1:
        raise ValueError(f"expected {k + 1} coefficient functions, got {len(phis)}")
    qf, qg = _quantize(f, N, k0, map_kind), _quantize(g, N, k0, map_kind)
    total = float(N) ** k * (qf.matrix @ qg.matrix)
    for j, phi in enumerate(phis):
        if canonicalize(phi).degree < 0:
            continue
        total = total - (-1j) ** j * float(N) ** (k - j) * _quantize(phi, N, k0, map_kind).matrix
    return float(np.linalg.norm(total, 2))


def star_defect_scan(f, g, phis, k, levels=DEFAULT_LEVELS, map_kind="geometric", k0=0) -> LevelScan:
    vals = map_levels(lambda N: star_defect(f, g, phis, k, N, map_kind, k0), levels)
    return LevelScan(tuple(levels), tuple(vals), f"star-defect[k={k},{map_kind}]")


def phi1_antisym_probe(
    f: SpherePolynomial,
    g: SpherePolynomial,
    x: SpherePoint,
    levels: Sequence[int] = DEFAULT_LEVELS,
    k0: int = 0,
    map_kind: str = "toeplitz",
) -> PowerFit:
    """Fit N * symbol([T f, T g], x) in powers of 1/N.

    The constant term estimates -i (phi_1(f,g) - phi_1(g,f))(x) = -i {f, g}(x).
    """
    if len(levels) < 3:
        raise FitError("phi1 probe needs at least 3 levels")

    def measure(N):
        qf, qg = _quantize(f, N, k0, map_kind), _quantize(g, N, k0, map_kind)
        return N * symbol(qf @ qg - qg @ qf, x)

    vals = map_levels(measure, levels)
    return fit_inverse_powers(LevelScan(tuple(levels), tuple(vals), "phi1-antisym"), len(levels) - 2)


def norm_scan(f: SpherePolynomial, levels: Sequence[int] = DEFAULT_LEVELS, map_kind: str = "toeplitz", k0: int = 0) -> LevelScan:
    vals = map_levels(lambda N: operator_norm(_quantize(f, N, k0, map_kind)), levels)
    return LevelScan(tuple(levels), tuple(vals), f"norm[{map_kind}]")


def trace_scan(f: SpherePolynomial, levels: Sequence[int] = DEFAULT_LEVELS, k0: int = 0) -> LevelScan:
    """tr_N T_N(f) per level."""
    vals = map_levels(lambda N: complex(np.trace(toeplitz(make_space(N, k0), f).matrix)), levels)
    return LevelScan(tuple(levels), tuple(vals), "trace[toeplitz]")


def leading_trace_coefficient(f: SpherePolynomial, levels: Sequence[int] = DEFAULT_LEVELS, k0: int = 0, k: int = 1) -> PowerFit:
    """Fit tr_N T_N(f) / N in powers of 1/N; c_0 is the leading growth rate."""
    scan = trace_scan(f, levels, k0)
    per_n = LevelScan(scan.levels, tuple(v / N for N, v in zip(scan.levels, scan.values)), "trace/N")
    return fit_inverse_powers(per_n, k)
