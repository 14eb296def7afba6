import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from btq.moyal import (
    FormalSeries,
    associator,
    gaussian,
    lie_action,
    moyal_product,
    poisson_bracket,
    poisson_power,
    random_series,
    series_from_dict,
    star_commutator,
    star_conjugate,
)

from oracles import flat_bracket_sympy, moyal_sympy, series_to_sympy

HBAR = sp.Symbol("hbar")
x, p = FormalSeries.x(), FormalSeries.p()
one = FormalSeries.constant(1, 1)


def truncate_expr(expr, K):
    poly = sp.Poly(sp.expand(expr), HBAR)
    return sp.expand(sum(c * HBAR ** m[0] for m, c in zip(poly.monoms(), poly.coeffs()) if m[0] <= K))


def as_expr(series):
    return series_to_sympy(series, HBAR)[0]


def test_x_star_p():
    expected = series_from_dict(1, {(1, 1, 0): 1, (0, 0, 1): -gaussian(0.5j)})
    assert moyal_product(x, p) == expected
    assert moyal_product(p, x) == series_from_dict(1, {(1, 1, 0): 1, (0, 0, 1): gaussian(0.5j)})


def test_canonical_commutator():
    comm = star_commutator(x, p)
    assert comm == FormalSeries.constant(1, -1j, hbar_power=1)


def test_quadratic_commutator():
    x2, p2 = moyal_product(x, x), moyal_product(p, p)
    xp = series_from_dict(1, {(1, 1, 1): -4j})
    assert x2 == series_from_dict(1, {(2, 0, 0): 1})
    assert star_commutator(x2, p2) == xp


def test_unit_law():
    rng = np.random.default_rng(0)
    for n in (1, 2):
        u = FormalSeries.constant(n, 1)
        for _ in range(10):
            f = random_series(rng, n)
            assert moyal_product(u, f) == f
            assert moyal_product(f, u) == f


@pytest.mark.parametrize("n", [1, 2])
def test_associativity_random(n):
    rng = np.random.default_rng(10 + n)
    for _ in range(50):
        f, g, h = (random_series(rng, n, degree=3, nterms=3) for _ in range(3))
        assert associator(f, g, h).is_zero()
    assert associator(x, p, x).is_zero()


def test_matches_exponential_oracle():
    rng = np.random.default_rng(1)
    for n in (1, 2):
        syms = sp.symbols(" ".join(f"x{i + 1} p{i + 1}" for i in range(n)))
        xs, ps = syms[0::2], syms[1::2]
        for _ in range(8):
            f = random_series(rng, n, degree=4, nterms=3, max_hbar=1)
            g = random_series(rng, n, degree=4, nterms=3, max_hbar=1)
            ours = as_expr(moyal_product(f, g, K=3))
            ref = truncate_expr(moyal_sympy(as_expr(f), as_expr(g), xs, ps, HBAR, 8), 3)
            assert sp.expand(ours - ref) == 0


def test_first_order_commutator_is_bracket():
    rng = np.random.default_rng(2)
    for n in (1, 2):
        syms = sp.symbols(" ".join(f"x{i + 1} p{i + 1}" for i in range(n)))
        for _ in range(10):
            f = random_series(rng, n, max_hbar=0)
            g = random_series(rng, n, max_hbar=0)
            c1 = star_commutator(f, g).coefficient(1)
            ref = -sp.I * flat_bracket_sympy(as_expr(f), as_expr(g), syms[0::2], syms[1::2])
            assert sp.expand(as_expr(c1) - ref) == 0
            assert poisson_bracket(f, g).scale(-1j) == c1
            assert star_commutator(f, g).coefficient(0).is_zero()


def test_conjugation():
    assert star_conjugate(FormalSeries.constant(1, 1j)) == FormalSeries.constant(1, -1j)
    assert star_conjugate(x) == x
    rng = np.random.default_rng(3)
    for _ in range(20):
        f, g = random_series(rng, 2), random_series(rng, 2)
        lhs = star_conjugate(moyal_product(f, g))
        rhs = moyal_product(star_conjugate(g), star_conjugate(f))
        assert lhs == rhs
        assert star_conjugate(star_conjugate(f)) == f


def test_hbar_linearity():
    rng = np.random.default_rng(4)
    for _ in range(10):
        f, g, h = (random_series(rng, 1) for _ in range(3))
        c = gaussian(complex(2, -3))
        assert moyal_product(f.scale(c) + h, g) == moyal_product(f, g).scale(c) + moyal_product(h, g)
        assert moyal_product(f.times_hbar(), g) == moyal_product(f, g).times_hbar()


def test_truncation():
    f = FormalSeries(1, {((3, 0), 0): 1}, K=1)
    g = FormalSeries(1, {((0, 3), 0): 1}, K=1)
    prod = moyal_product(f, g)
    assert prod.hbar_powers() == {0, 1}
    assert moyal_product(f, g, K=6).truncate(1) == prod
    with pytest.raises(ValueError):
        moyal_product(f, g, K=-1)


@pytest.mark.parametrize("n,j", [(1, 0), (1, 1), (1, 3), (2, 2), (3, 2)])
def test_bidifferential_orders(n, j):
    B = poisson_power(n, j)
    assert B.differential_orders() == {2 * j}
    for left, right, _ in B.terms:
        assert sum(left) == sum(right) == j


def test_pi_one_is_bracket():
    rng = np.random.default_rng(5)
    for _ in range(10):
        f, g = random_series(rng, 2, max_hbar=0), random_series(rng, 2, max_hbar=0)
        assert poisson_power(2, 1).apply(f, g) == poisson_bracket(f, g)
    assert poisson_bracket(x, p) == one


# -- derivations from hbar^-1 W ----------------------------------------------------------


def test_lie_action_examples():
    central = FormalSeries.constant(1, 5, hbar_power=-1)
    rng = np.random.default_rng(6)
    f = random_series(rng, 1)
    assert lie_action(central, f).is_zero()
    D = FormalSeries(1, {((1, 0), -1): 1}, hbar_min=-1)
    assert lie_action(D, p) == FormalSeries.constant(1, -1j)


def test_lie_action_is_derivation():
    rng = np.random.default_rng(7)
    for _ in range(10):
        D = FormalSeries(1, random_series(rng, 1, degree=3, max_hbar=0).times_hbar(-1).terms, hbar_min=-1)
        f, g = random_series(rng, 1), random_series(rng, 1)
        K = 4
        lhs = lie_action(D, moyal_product(f, g), K)
        rhs = moyal_product(lie_action(D, f, K), g, K) + moyal_product(f, lie_action(D, g, K), K)
        assert (lhs - rhs).truncate(K - 1).is_zero()


def test_lie_action_rejects_deep_poles():
    D = FormalSeries(1, {((1, 0), -2): 1}, hbar_min=-2)
    with pytest.raises(ValueError):
        lie_action(D, p)


# -- serialization and validation ------------------------------------------------------------


def test_json_round_trip():
    rng = np.random.default_rng(8)
    f = random_series(rng, 2)
    back = FormalSeries.from_json(f.to_json())
    assert back == f
    data = json.loads(f.to_json())
    assert data["n"] == 2 and data["K"] == f.K
    assert f.to_json() == back.to_json()


def test_mismatched_dimension_rejected():
    with pytest.raises(ValueError):
        moyal_product(FormalSeries.x(1), FormalSeries.x(2))
    with pytest.raises(ValueError):
        FormalSeries(1, {((1, 0, 0), 0): 1})


@given(
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(-3, 3)), min_size=1, max_size=4),
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(-3, 3)), min_size=1, max_size=4),
)
@settings(max_examples=40, deadline=None)
def test_commutator_antisymmetric(a, b):
    f = FormalSeries(1, {((i, j), 0): c for i, j, c in a})
    g = FormalSeries(1, {((i, j), 0): c for i, j, c in b})
    assert (star_commutator(f, g) + star_commutator(g, f)).is_zero()
    # odd hbar powers of the commutator only
    assert all(h % 2 == 1 for h in star_commutator(f, g).hbar_powers())
