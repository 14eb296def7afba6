"""Toeplitz and geometric quantization on H_N, coherent states, traces and norms."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import serial
from .errors import ConfigurationError, QuadratureError
from .sections import SectionSpace, make_space, section_values
from .sphere import (
    QuadratureGrid,
    SpherePoint,
    SpherePolynomial,
    build_grid,
    canonicalize,
    laplacian,
)

BASIS_LABEL = "ortho-monomial-asc"


@dataclass(frozen=True, eq=False)
class QuantOperator:
    """Matrix in the orthonormal monomial basis of H_N (ascending j).

    ``blocks`` > 1 marks an element of M_m(A_N) stored as an m x m block matrix.
    """

    space: SectionSpace
    matrix: np.ndarray
    blocks: int = 1

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        n = self.blocks * self.space.dim
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match {n}x{n}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def _check(self, other: "QuantOperator"):
        if other.space.M != self.space.M or other.blocks != self.blocks:
            raise ValueError("operators live on different spaces")

    def __add__(self, other):
        self._check(other)
        return QuantOperator(self.space, self.matrix + other.matrix, self.blocks)

    def __sub__(self, other):
        self._check(other)
        return QuantOperator(self.space, self.matrix - other.matrix, self.blocks)

    def __matmul__(self, other):
        self._check(other)
        return QuantOperator(self.space, self.matrix @ other.matrix, self.blocks)

    def __mul__(self, scalar):
        return QuantOperator(self.space, self.matrix * scalar, self.blocks)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def adjoint(self) -> "QuantOperator":
        return QuantOperator(self.space, self.matrix.conj().T, self.blocks)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def header(self) -> dict:
        s = self.space
        return {"N": s.N, "k0": s.k0, "M": s.M, "basis": BASIS_LABEL, "blocks": self.blocks}

    def to_json(self) -> str:
        entries = [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix]
        return serial.dumps({"header": self.header(), "entries": entries})

    @classmethod
    def from_json(cls, text: str) -> "QuantOperator":
        data = json.loads(text)
        head = data["header"]
        if head.get("basis") != BASIS_LABEL:
            raise ValueError(f"unsupported basis label {head.get('basis')!r}")
        mat = np.array([[complex(re, im) for re, im in row] for row in data["entries"]])
        return cls(make_space(head["N"], head["k0"]), mat, head.get("blocks", 1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        h = self.header()
        buf.write("# " + serial.dumps(h, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "col", "re", "im"])
        for (i, j), z in np.ndenumerate(self.matrix):
            writer.writerow([i, j, format(z.real, ".17g"), format(z.imag, ".17g")])
        return buf.getvalue()


@lru_cache(maxsize=32)
def _basis_on_grid(space: SectionSpace, grid: QuadratureGrid) -> np.ndarray:
    vals = section_values(space, grid)
    vals.setflags(write=False)
    return vals


def required_order(space: SectionSpace, f: SpherePolynomial) -> int:
    return 2 * space.M + max(canonicalize(f).degree, 0)


def default_grid(space: SectionSpace, f: SpherePolynomial) -> QuadratureGrid:
    return build_grid(max(required_order(space, f), 1))


def toeplitz(space: SectionSpace, f: SpherePolynomial, grid: QuadratureGrid | None = None) -> QuantOperator:
    """T_N(f): multiply by f, then project orthogonally back onto H_N."""
    if space.empty:
        raise ConfigurationError(f"H_N is empty at N={space.N}, k0={space.k0}")
    f = canonicalize(f)
    if grid is None:
        grid = default_grid(space, f)
    need = required_order(space, f)
    if grid.exactness < need:
        raise QuadratureError(f"grid exactness {grid.exactness} < required {need} (2M + deg f)")
    psi = _basis_on_grid(space, grid)
    weighted = psi * (grid.weights * f.evaluate(grid.u, grid.v, grid.w))[:, None]
    return QuantOperator(space, psi.conj().T @ weighted)


def geometric(space: SectionSpace, f: SpherePolynomial, grid: QuadratureGrid | None = None) -> QuantOperator:
    """Q_N(f) = T_N(f + Delta f / 2N)."""
    if space.N == 0:
        raise ConfigurationError("geometric quantization needs N >= 1")
    g = f + laplacian(f) / (2 * space.N)
    return toeplitz(space, g, grid)


MAPS = {"toeplitz": toeplitz, "geometric": geometric}


def quantization_map(kind: str):
    try:
        return MAPS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown map kind {kind!r}") from None


@dataclass(frozen=True, eq=False)
class CoherentState:
    space: SectionSpace
    point: SpherePoint
    vector: np.ndarray


def coherent_state(space: SectionSpace, x: SpherePoint) -> CoherentState:
    """Normalized reproducing-kernel vector at x.

    Component j is conj(e_j(x)) in the unitary frame, i.e.
    sqrt(binom(M, j)) cos(theta/2)^(M-j) sin(theta/2)^j e^{-i j phi}.
    """
    if space.empty:
        raise ConfigurationError("no coherent states in an empty space")
    M = space.M
    j = np.arange(M + 1)
    half = x.theta / 2.0
    vec = np.asarray(space.ortho_scale) * np.cos(half) ** (M - j) * np.sin(half) ** j
    vec = vec * np.exp(-1j * j * x.phi)
    return CoherentState(space, x, vec / np.linalg.norm(vec))


def symbol(A: QuantOperator, x: SpherePoint) -> complex:
    """Berezin covariant symbol <c_x, A c_x>."""
    c = coherent_state(A.space, x).vector
    return complex(np.vdot(c, A.matrix @ c))


def operator_norm(A: QuantOperator) -> float:
    if A.matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(A.matrix, 2))


def partial_trace(A: QuantOperator) -> complex:
    return complex(np.trace(A.matrix))


def azimuthal_unitary(space: SectionSpace, alpha: float) -> np.ndarray:
    """Unitary on H_N induced by z -> e^{i alpha} z (rotation about the u-axis)."""
    return np.diag(np.exp(-1j * alpha * np.arange(space.dim)))
