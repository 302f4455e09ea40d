import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicritical import maps, renorm
from bicritical.errors import CapExceeded


def _toy_pair(eps=0.0):
    """Pair of translation-like maps; not commuting in general, used for metric checks."""
    eta = renorm.SyntheticBranch(lambda t: t - 0.7 + eps * t * t, lambda t: 1 + 2 * eps * t)
    xi = renorm.SyntheticBranch(lambda t: t + 1.0, lambda t: np.ones_like(t))
    return renorm.CommutingPair(eta, xi)


def test_extracted_pairs_validate(golden):
    for n in range(1, 8):
        z = renorm.extract_pair(golden, 0, n)
        report = renorm.validate_pair(z)
        assert report["ok"], report
        assert report["commute_gap"] < 1e-15


def test_period_equals_next_digit(engineered):
    digits = maps.map_digits(engineered, 8).digits
    for n in range(0, 5):
        assert renorm.period(renorm.extract_pair(engineered, 0, n)) == digits[n + 1]


def test_renormalization_matches_next_level(golden):
    for n in range(2, 6):
        a = renorm.renormalize(renorm.extract_pair(golden, 0, n))
        b = renorm.normalize(renorm.extract_pair(golden, 0, n + 1))
        assert renorm.pair_distance(a, b, 0) < 1e-8


def test_distance_to_itself_is_zero(golden):
    z = renorm.normalize(renorm.extract_pair(golden, 0, 4))
    assert renorm.pair_distance(z, z, 0) == 0
    assert renorm.pair_distance(z, z, 1) == 0


def test_homothety_invariance(golden):
    z = renorm.extract_pair(golden, 0, 5)
    for lam in (0.3, 3.7, 12.0):
        scaled = renorm._scaled_pair(z, lam)
        assert renorm.pair_distance(z, scaled, 0) <= 1e-15
        assert renorm.pair_distance(z, scaled, 1) <= 1e-15


def test_mobius_sends_endpoints():
    tau = renorm.Mobius(-0.4, 1.3)
    assert tau(-0.4) == pytest.approx(-1)
    assert tau(0.0) == 0
    assert tau(1.3) == pytest.approx(1)
    assert tau.inverse(tau(0.77)) == pytest.approx(0.77)


def test_lattice_endpoints():
    y = renorm.lattice(16)
    assert y[0] == 0 and y[-1] == 1 and np.all(np.diff(y) > 0)


def test_period_cap():
    eta = renorm.SyntheticBranch(lambda t: t - 1e-9, lambda t: np.ones_like(t))
    xi = renorm.SyntheticBranch(lambda t: t + 1.0, lambda t: np.ones_like(t))
    with pytest.raises(CapExceeded):
        renorm.period(renorm.CommutingPair(eta, xi), cap=1000)


def test_pair_summary_json(golden):
    z = renorm.extract_pair(golden, 0, 3)
    text = renorm.pair_summary_json(z, renorm.extract_pair(golden, 0, 4))
    assert '"period": 1' in text


def test_k_must_be_zero_or_one():
    with pytest.raises(ValueError):
        renorm.pair_distance(_toy_pair(), _toy_pair(), 2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_d0_never_exceeds_d1(e1, e2):
    z1, z2 = _toy_pair(e1), _toy_pair(e2)
    assert renorm.pair_distance(z1, z2, 0, M=256) <= renorm.pair_distance(z1, z2, 1, M=256)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_d0_triangle_inequality(e1, e2, e3):
    z1, z2, z3 = _toy_pair(e1), _toy_pair(e2), _toy_pair(e3)
    d = renorm.pair_distance
    assert d(z1, z3, 0, M=128) <= d(z1, z2, 0, M=128) + d(z2, z3, 0, M=128) + 1e-14
