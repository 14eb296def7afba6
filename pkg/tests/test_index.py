import json
from fractions import Fraction

import numpy as np
import pytest

from btq.errors import LiftError, SpanError
from btq.index import (
    BOTT_ORIENTATION,
    CharacterData,
    CohoClass,
    Laurent,
    a_hat_cp1,
    beta_check,
    bott_projector,
    c1_tangent,
    character,
    chern_number,
    formal_index,
    gq_index_polynomial,
    idempotent_residual,
    index_check,
    lift_idempotent,
    named_idempotent,
    newton_idempotent,
    quantize_matrix,
    sigma,
    spectral_gap,
    theta_class,
    todd_cp1,
    trivial_idempotent,
    unit,
    zero_idempotent,
)
from btq.quantize import partial_trace
from btq.sections import make_space
from btq.sphere import ONE

# -- Laurent polynomials and cohomology -------------------------------------------------


def test_laurent_ring():
    a = Laurent({-1: 1, 0: 2})
    b = Laurent({1: 3})
    assert a * b == Laurent({0: 3, 1: 6})
    assert a + b - b == a
    assert (a - a) == Laurent()
    assert a(0.5) == pytest.approx(4.0)
    assert a.invert_variable("N") == Laurent({1: 1, 0: 2}, "N")
    assert a.to_dict() == {"hbar^-1": 1, "1": 2}


def test_cup_product_and_exponential():
    s = sigma()
    assert s * s == CohoClass.of(0, 0)
    assert unit() * s == s
    assert s.exp() == unit() + s
    assert s.integrate() == Laurent(1)
    with pytest.raises(ValueError):
        unit().exp()


def test_characteristic_classes():
    assert c1_tangent().integrate() == Laurent(2)  # Euler characteristic
    assert todd_cp1() == (CohoClass.of(Fraction(1, 2)) * c1_tangent()).exp() * a_hat_cp1()
    assert todd_cp1().integrate() == Laurent(1)
    assert a_hat_cp1() == unit()


@pytest.mark.parametrize("k0,const", [(0, 1), (1, 2), (2, 3), (-1, 0)])
def test_theta_class(k0, const):
    th = theta_class(k0)
    assert th.integrate() == Laurent({-1: 1, 0: const})
    assert th.deg0 == Laurent()


def test_gq_index_polynomial():
    assert gq_index_polynomial(CharacterData(1, 0), 0) == Laurent({1: 1, 0: 1}, "N")
    assert gq_index_polynomial(CharacterData(2, 0), 1) == Laurent({1: 2, 0: 4}, "N")
    assert gq_index_polynomial(CharacterData(1, -1), 0)(16) == 16


@pytest.mark.parametrize("rank,deg", [(1, 0), (2, 0), (1, 1), (1, -1), (3, 2)])
@pytest.mark.parametrize("k0", [0, 1, 2])
def test_formal_index_matches_trace_polynomial(rank, deg, k0):
    ch = CharacterData(rank, deg)
    formal = formal_index(ch, theta_class(k0))
    assert formal == Laurent({-1: rank, 0: rank * (k0 + 1) + deg})
    assert formal.invert_variable("N") == gq_index_polynomial(ch, k0)


# -- classical idempotents ------------------------------------------------------------


@pytest.mark.parametrize("k", [1, -1])
def test_bott_projector(k):
    e = bott_projector(k)
    assert e.is_idempotent()
    assert e.is_hermitian()
    assert e.trace() == ONE
    assert character(e) == CharacterData(1, BOTT_ORIENTATION * k)


def test_orientation_by_chern_weil():
    # regression: the declared orientation agrees with the curvature integral
    assert chern_number(bott_projector(1)) == pytest.approx(BOTT_ORIENTATION, abs=1e-10)
    assert chern_number(bott_projector(-1)) == pytest.approx(-BOTT_ORIENTATION, abs=1e-10)
    assert chern_number(trivial_idempotent(2)) == pytest.approx(0, abs=1e-12)


def test_trivial_and_zero():
    assert trivial_idempotent(3).is_idempotent()
    assert character(trivial_idempotent(3)) == CharacterData(3, 0)
    assert character(zero_idempotent()) == CharacterData(0, 0)
    assert named_idempotent("trivial2").entries == trivial_idempotent(2).entries
    with pytest.raises(ValueError):
        named_idempotent("mobius")


# -- lifting ----------------------------------------------------------------------------


def test_lift_identity_needs_no_iterations():
    space = make_space(10, 1)
    a = quantize_matrix(space, trivial_idempotent(1)).matrix
    x, history = newton_idempotent(a)
    assert len(history) == 1
    assert np.allclose(x, np.eye(12))


def test_lift_zero():
    lifted = lift_idempotent(make_space(6, 0), zero_idempotent())
    assert np.allclose(lifted.matrix, 0)
    assert partial_trace(lifted) == 0


def test_lift_bott():
    space = make_space(16, 0)
    lifted = lift_idempotent(space, bott_projector(1))
    assert idempotent_residual(lifted.matrix) <= 1e-12
    tr = partial_trace(lifted).real
    assert abs(tr - round(tr)) < 1e-9
    assert lifted.is_hermitian()


def test_newton_converges_quadratically():
    a = quantize_matrix(make_space(16, 0), bott_projector(1)).matrix
    _, history = newton_idempotent(a)
    assert len(history) <= 31
    assert history[-1] <= 1e-12
    for r0, r1 in zip(history, history[1:]):
        if r0 > 1e-10:
            assert r1 <= 4 * r0 ** 2


def test_lift_fails_without_gap():
    # with a single section T(u) = T(v) = T(w) = 0, so the symbol matrix is I/2
    space = make_space(1, -1)
    with pytest.raises(LiftError) as info:
        lift_idempotent(space, bott_projector(1))
    assert info.value.gap == pytest.approx(0)


def test_smallest_level_for_bott():
    for k0 in (0, 1, 2):
        space = make_space(1, k0)
        assert spectral_gap(quantize_matrix(space, bott_projector(1)).matrix) >= 0.1
        assert index_check(1, k0, bott_projector(1)).passed


def test_newton_reports_nonconvergence():
    a = np.diag([0.5, 0.2])
    with pytest.raises(LiftError):
        newton_idempotent(a)


# -- index comparisons ----------------------------------------------------------------------


@pytest.mark.parametrize(
    "N,k0,name,expected", [(16, 0, "trivial1", 17), (16, 1, "trivial2", 36), (16, 0, "bott+1", 16), (16, 0, "bott-1", 18)]
)
def test_index_examples(N, k0, name, expected):
    report = index_check(N, k0, named_idempotent(name))
    assert report.predicted == expected
    assert report.passed
    assert abs(report.measured_trace - expected) <= 1e-6


def test_index_geometric_map():
    assert index_check(12, 1, bott_projector(-1), map_kind="geometric").passed


def test_index_report_json():
    report = index_check(8, 0, bott_projector(1)).to_dict()
    assert set(report) == {"inputs", "measured", "predicted", "residual", "idempotent_residual", "pass"}
    json.dumps(report)


@pytest.mark.parametrize("k0", [0, 1, 2])
def test_beta_check(k0):
    names = ("trivial1", "bott+1", "bott-1")
    report = beta_check((8, 16, 32), k0, [named_idempotent(n) for n in names])
    assert report.passed
    assert report.beta == Laurent(1)
    assert report.theta_deg2 == Laurent({-1: 1, 0: k0 + 1})
    for name in names:
        assert report.fitted[name] == report.predicted[name]


def test_beta_check_span_error():
    with pytest.raises(SpanError):
        beta_check((8, 16), 0, [trivial_idempotent(1), trivial_idempotent(2)])


def test_beta_check_detects_wrong_shift():
    # the traces at k0 = 1 disagree with theta for k0 = 0
    report = beta_check((8, 16), 1, [trivial_idempotent(1), bott_projector(1)])
    wrong = formal_index(CharacterData(1, 0), theta_class(0))
    assert report.fitted["trivial1"] != wrong


def test_bott_gap_closed_form():
    # the gap is M / (2 (M + 2)), so the lift exists exactly when M >= 1
    for k0 in (-1, 0, 1, 2):
        for N in range(max(1, -k0), 12):
            space = make_space(N, k0)
            for k in (1, -1):
                gap = spectral_gap(quantize_matrix(space, bott_projector(k)).matrix)
                assert gap == pytest.approx(space.M / (2 * (space.M + 2)), abs=1e-12)
