"""Berezin-Toeplitz quantization of CP^1 checked against formal deformation quantization."""

from .sphere import (
    NORTH,
    ONE,
    SOUTH,
    U,
    V,
    W,
    SpherePoint,
    SpherePolynomial,
    build_grid,
    canonicalize,
    integrate,
    laplacian,
    poisson_bracket,
    sup_norm,
)
from .sections import SectionSpace, gram_entry, make_space
from .quantize import (
    QuantOperator,
    coherent_state,
    geometric,
    operator_norm,
    partial_trace,
    symbol,
    toeplitz,
)

__version__ = "0.1.0"
