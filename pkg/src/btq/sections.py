"""Holomorphic section spaces H_N = H^0(CP^1, O(M)), M = N + k0.

Sections are polynomials of degree <= M in the chart variable z. The
Hermitian metric on O(M) is the Fubini-Study one, |s|^2 (1 + |z|^2)^(-M),
and the inner product integrates it against omega / 2pi with an overall
constant c = M + 1, so that the constant section has unit norm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import serial
from .sphere import QuadratureGrid


@dataclass(frozen=True)
class SectionSpace:
    N: int
    k0: int
    M: int
    gram_diag: tuple[float, ...]
    ortho_scale: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.gram_diag)

    @property
    def empty(self) -> bool:
        return self.dim == 0

    @property
    def gram_constant(self) -> int:
        return self.M + 1

    def to_json(self) -> str:
        return serial.dumps(
            {"N": self.N, "k0": self.k0, "M": self.M, "gram_diag": list(self.gram_diag)}
        )

    @classmethod
    def from_json(cls, text: str) -> "SectionSpace":
        data = json.loads(text)
        space = make_space(int(data["N"]), int(data["k0"]))
        if space.M != data["M"] or list(space.gram_diag) != list(data["gram_diag"]):
            raise ValueError("serialized SectionSpace is inconsistent with (N, k0)")
        return space


def exact_gram(M: int, j: int) -> Fraction:
    """(M + 1) * j! (M - j)! / (M + 1)!  ==  1 / binomial(M, j)."""
    return Fraction(1, math.comb(M, j))


def make_space(N: int, k0: int = 0) -> SectionSpace:
    M = N + k0
    if M < 0:
        return SectionSpace(N, k0, M, (), ())
    gram = tuple(float(exact_gram(M, j)) for j in range(M + 1))
    scale = tuple(math.sqrt(math.comb(M, j)) for j in range(M + 1))
    return SectionSpace(N, k0, M, gram, scale)


def gram_entry(space: SectionSpace, j: int) -> float:
    if not 0 <= j < space.dim:
        raise IndexError(f"basis index {j} out of range for dimension {space.dim}")
    return space.gram_diag[j]


def section_values(space: SectionSpace, grid: QuadratureGrid) -> np.ndarray:
    """Orthonormal basis sections at the grid nodes, in a unitary frame.

    Returns an array of shape (nodes, dim) whose column j holds
    sqrt(c) * ortho_scale[j] * z^j (1 + |z|^2)^(-M/2), which in polar angles is
    sqrt(c * binom(M, j)) sin(theta/2)^j cos(theta/2)^(M-j) e^{i j phi}.
    """
    M = space.M
    j = np.arange(space.dim)
    s = np.sin(grid.theta / 2.0)[:, None]
    c = np.cos(grid.theta / 2.0)[:, None]
    amp = np.sqrt(space.gram_constant) * np.asarray(space.ortho_scale)[None, :]
    return amp * s ** j * c ** (M - j) * np.exp(1j * grid.phi[:, None] * j)


def gram_by_quadrature(space: SectionSpace, grid: QuadratureGrid) -> np.ndarray:
    """Monomial-basis Gram diagonal recomputed numerically (cross-check)."""
    M = space.M
    if grid.exactness < M:
        raise ValueError("grid too coarse for the Gram cross-check")
    j = np.arange(space.dim)
    s2 = ((1.0 - grid.u) / 2.0)[:, None]
    c2 = ((1.0 + grid.u) / 2.0)[:, None]
    # |z|^{2j} (1+|z|^2)^{-M} = sin^2(theta/2)^j cos^2(theta/2)^(M-j)
    return space.gram_constant * (grid.weights[:, None] * s2 ** j * c2 ** (M - j)).sum(axis=0)
