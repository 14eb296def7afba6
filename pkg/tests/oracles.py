"""Independent reference computations used by the tests.

Nothing here imports the code paths under test beyond plain data types.
"""

from __future__ import annotations

import math
from fractions import Fraction

import sympy as sp


def double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * double_factorial(n - 2)


def sphere_moment(a: int, b: int, c: int) -> Fraction:
    """Average of u^a v^b w^c over the round sphere (closed-form Beta integral)."""
    if a % 2 or b % 2 or c % 2:
        return Fraction(0)
    num = double_factorial(a - 1) * double_factorial(b - 1) * double_factorial(c - 1)
    return Fraction(num, double_factorial(a + b + c + 1))


def beta_radial(j: int, M: int) -> Fraction:
    """int_0^inf r^{2j} (1 + r^2)^{-M-2} 2r dr = j! (M-j)! / (M+1)!."""
    return Fraction(math.factorial(j) * math.factorial(M - j), math.factorial(M + 1))


def toeplitz_u_diagonal(M: int, j: int) -> Fraction:
    # <z^j, u z^j> / <z^j, z^j> with u = (1 - r^2)/(1 + r^2) = 2/(1 + r^2) - 1
    return 2 * beta_radial(j, M + 1) / beta_radial(j, M) - 1


def toeplitz_v_offdiagonal(M: int, j: int) -> float:
    """Orthonormal <e_j, v e_{j+1}> from v = (z + zbar)/(1 + |z|^2)."""
    num = beta_radial(j + 1, M + 1)
    return float(num) / math.sqrt(float(beta_radial(j, M) * beta_radial(j + 1, M)))


# -- chart calculus via sympy ----------------------------------------------------------

X, Y = sp.symbols("x y", real=True)
R2 = X ** 2 + Y ** 2
U_CHART = (1 - R2) / (1 + R2)
V_CHART = 2 * X / (1 + R2)
W_CHART = 2 * Y / (1 + R2)


def chart_expr(poly) -> sp.Expr:
    """SpherePolynomial -> sympy expression in the chart (x, y), z = x + i y."""
    expr = 0
    for (a, b, c), coeff in poly.items():
        expr += sp.nsimplify(coeff) * U_CHART ** a * V_CHART ** b * W_CHART ** c
    return expr


def chart_bracket(f: sp.Expr, g: sp.Expr) -> sp.Expr:
    # omega = 2 dx^dy / (1 + r^2)^2  =>  {f, g} = (1 + r^2)^2 / 2 (f_x g_y - f_y g_x)
    return (1 + R2) ** 2 / 2 * (sp.diff(f, X) * sp.diff(g, Y) - sp.diff(f, Y) * sp.diff(g, X))


def chart_laplacian(f: sp.Expr) -> sp.Expr:
    # metric 2 (dx^2 + dy^2) / (1 + r^2)^2, nonnegative convention
    return -(1 + R2) ** 2 / 2 * (sp.diff(f, X, 2) + sp.diff(f, Y, 2))


def at(expr: sp.Expr, z: complex) -> complex:
    return complex(sp.N(expr.subs({X: z.real, Y: z.imag})))


# -- flat Poisson bracket on R^{2n} ------------------------------------------------------


def flat_bracket_sympy(f: sp.Expr, g: sp.Expr, xs, ps) -> sp.Expr:
    return sp.expand(sum(sp.diff(f, x) * sp.diff(g, p) - sp.diff(f, p) * sp.diff(g, x) for x, p in zip(xs, ps)))


def series_to_sympy(series, hbar):
    """FormalSeries -> sympy expression in x1, p1, ... and hbar."""
    n = series.n
    syms = sp.symbols(" ".join(f"x{i + 1} p{i + 1}" for i in range(n)))
    expr = 0
    for (exps, h), c in series.terms.items():
        term = sp.Rational(int(c.x.numerator), int(c.x.denominator)) + sp.I * sp.Rational(
            int(c.y.numerator), int(c.y.denominator)
        )
        for s, e in zip(syms, exps):
            term *= s ** e
        expr += term * hbar ** h
    return sp.expand(expr), syms


def moyal_sympy(f: sp.Expr, g: sp.Expr, xs, ps, hbar, K: int) -> sp.Expr:
    """f * g by iterating pi on doubled variables; truncated above hbar^K."""
    xs2 = sp.symbols(" ".join(f"xx{i}" for i in range(len(xs))) + " _")[: len(xs)]
    ps2 = sp.symbols(" ".join(f"pp{i}" for i in range(len(ps))) + " _")[: len(ps)]
    F = f * g.subs(dict(zip(xs + ps, xs2 + ps2)), simultaneous=True)
    back = dict(zip(xs2 + ps2, xs + ps))
    total, term = 0, F
    for j in range(K + 1):
        total += (-sp.I * hbar / 2) ** j / sp.factorial(j) * term.subs(back, simultaneous=True)
        term = sp.expand(
            sum(sp.diff(term, x, p2) - sp.diff(term, p, x2) for x, p, x2, p2 in zip(xs, ps, xs2, ps2))
        )
        if term == 0:
            break
    return sp.expand(total)
