from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicritical.errors import BadInput, PrecisionExhausted, RationalInput
from bicritical.numerics import (Arc, CirclePoint, ContinuedFraction, cf_digits, cf_of_rational, circle_distance,
                                 convergents, frac, get_precision, looks_rational, set_precision,
                                 setA_diagnostics, tolerance, working_precision)


def brute_value(digits):
    x = Fraction(0)
    for a in reversed(digits):
        x = 1 / (a + x)
    return x


def test_convergents_small_case():
    assert convergents((2, 3, 4)) == ((0, 1), (1, 2), (3, 7), (13, 30))


def test_golden_and_silver_digits():
    assert cf_digits((mpmath.sqrt(5) - 1) / 2, 15).digits == (1,) * 15
    assert cf_digits(mpmath.sqrt(2) - 1, 10).digits == (2,) * 10


def test_pi_digits():
    assert cf_digits(mpmath.pi - 3, 8).digits == (7, 15, 1, 292, 1, 1, 1, 2)


def test_rational_input_is_refused():
    with pytest.raises(RationalInput):
        cf_digits(mpmath.mpf(3) / 7, 5)


def test_cf_digits_range_checks():
    with pytest.raises(BadInput):
        cf_digits("1.5", 3)
    with pytest.raises(BadInput):
        cf_digits("0.3", 0)


def test_digits_run_out_at_low_precision():
    with working_precision(15):
        with pytest.raises(PrecisionExhausted):
            cf_digits((mpmath.sqrt(5) - 1) / 2, 60)


def test_working_precision_restores():
    before = get_precision()
    with working_precision(50):
        assert mpmath.mp.dps == 50
    assert get_precision() == before


def test_precision_bounds():
    with pytest.raises(BadInput):
        set_precision(5)
    with pytest.raises(BadInput):
        set_precision(500)


def test_canonical_and_extended():
    assert ContinuedFraction((2, 3, 1)).canonical().digits == (2, 4)
    assert ContinuedFraction((1, 2)).extended(5).digits == (1, 2, 2, 2, 2)
    assert ContinuedFraction((2, 3, 1)).value() == ContinuedFraction((2, 4)).value()


def test_to_scalar_of_golden_tail():
    assert abs(ContinuedFraction((1,)).to_scalar() - (mpmath.sqrt(5) - 1) / 2) < tolerance()


def test_arc_wraps_around_zero():
    arc = Arc(CirclePoint("0.9"), "0.2")
    assert arc.contains("0.05")
    assert not arc.contains("0.2")
    assert arc.contains_arc(Arc(CirclePoint("0.95"), "0.1"))
    with pytest.raises(BadInput):
        Arc(CirclePoint("0.1"), "1.5")


def test_set_a_bounded_type():
    summary = setA_diagnostics((1,) * 20).summary()
    assert summary["cond1_pass"] and summary["cond2_pass"]
    assert summary["cesaro_last"] == 0.0


def test_set_a_rejects_bad_digits():
    with pytest.raises(BadInput):
        setA_diagnostics(())
    with pytest.raises(BadInput):
        setA_diagnostics((1, 0, 2))


def test_looks_rational():
    assert looks_rational(mpmath.mpf(1) / 3) == Fraction(1, 3)
    assert looks_rational(mpmath.sqrt(2) - 1) is None


@given(st.lists(st.integers(1, 50), min_size=1, max_size=14))
def test_convergents_match_fraction_evaluation(digits):
    conv = convergents(digits)
    for n in range(1, len(digits) + 1):
        p, q = conv[n]
        assert Fraction(p, q) == brute_value(digits[:n])
        assert q == brute_value(digits[:n]).denominator


@given(st.lists(st.integers(1, 30), min_size=2, max_size=14))
def test_convergent_determinant(digits):
    conv = convergents(digits)
    for n in range(1, len(conv)):
        (p0, q0), (p1, q1) = conv[n - 1], conv[n]
        assert abs(p1 * q0 - p0 * q1) == 1


@given(st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(999, 1000)))
def test_cf_of_rational_round_trip(x):
    if x.denominator == 1:
        return
    assert cf_of_rational(x).value() == x


@settings(max_examples=60)
@given(st.lists(st.integers(1, 9), min_size=12, max_size=12))
def test_cf_digits_recovers_quadratic_tail(digits):
    x = ContinuedFraction(tuple(digits)).to_scalar()
    assert cf_digits(x, 12).digits == tuple(digits)


@given(st.floats(-50, 50, allow_nan=False), st.floats(-50, 50, allow_nan=False))
def test_circle_distance_is_a_metric_on_lifts(x, y):
    d = circle_distance(x, y)
    assert 0 <= d <= 0.5
    assert d == circle_distance(y, x)
    assert 0 <= frac(x) < 1
