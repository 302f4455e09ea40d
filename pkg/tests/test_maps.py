import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicritical import maps
from bicritical.errors import BadInput, DegenerateParameter
from bicritical.numerics import ContinuedFraction, frac


def test_trig_critical_points_are_cubic():
    f = maps.TrigBicritical("0.3", "0.2")
    assert len(f.critical_points) == 2
    for c in f.crit_lifts:
        _, d1, d2, d3 = f.derivs(c)
        assert abs(d1) < 1e-25 and abs(d2) < 1e-25 and d3 > 0
    assert all(cp.criticality == 3 for cp in f.critical_points)


def test_trig_derivatives_match_numerical_differentiation():
    f = maps.TrigBicritical("0.3", "0.2", b="0.4")
    x = mpmath.mpf("0.41")
    vals = f.derivs(x)
    for k in (1, 2, 3):
        assert abs(vals[k] - mpmath.diff(f.lift, x, k)) < 1e-20


def test_harmonic_term_keeps_critical_points():
    plain, bent = maps.TrigBicritical("0.3", "0.1"), maps.TrigBicritical("0.3", "0.1", b="0.5")
    assert plain.crit_lifts == bent.crit_lifts
    assert bent.lift(1) - bent.lift(0) == pytest.approx(1)


def test_degree_one_lift():
    f = maps.TrigBicritical("0.27", "-0.4", shift="0.05", b="-0.3")
    for x in map(mpmath.mpf, ("0.0", "0.3", "0.77")):
        assert abs(f.lift(x + 1) - f.lift(x) - 1) < 1e-28


def test_parameter_validation():
    with pytest.raises(DegenerateParameter):
        maps.TrigBicritical("0.3", "1.5")
    with pytest.raises(DegenerateParameter):
        maps.TrigBicritical("0.3", "0.2", b="1")


def test_arnold_family_has_n_critical_points():
    f = maps.ArnoldMulticritical("0.3", 2)
    assert len(f.critical_points) == 2
    assert abs(f.derivs(f.crit_lifts[0])[1]) < 1e-25


def test_inverse_round_trip():
    f = maps.TrigBicritical("0.3", "0.2")
    for y in ("0.123", "0.5", "0.99"):
        assert abs(f.lift(f.inverse(y)) - mpmath.mpf(y)) < 1e-28


def test_dict_round_trip():
    f = maps.TrigBicritical("0.3", "0.2", b="0.25")
    again = maps.map_from_dict(f.to_dict())
    assert again.to_dict() == f.to_dict()
    x = mpmath.mpf("0.4")
    assert again.lift(x) == f.lift(x)


def test_rotated_copy_is_conjugate_by_rotation():
    f = maps.TrigBicritical("0.3", "0.2")
    g = maps.rotated_copy(f, "0.1")
    x = mpmath.mpf("0.37")
    assert abs(g.lift(x + mpmath.mpf("0.1")) - (f.lift(x) + mpmath.mpf("0.1"))) < 1e-28


def test_tuning_hits_golden_and_silver(golden):
    assert maps.rotation_number_digits(golden, 16).digits == (1,) * 16
    silver = maps.tune_rotation(lambda a: maps.TrigBicritical(a, "0.2"), ContinuedFraction((2,)), 8)
    assert maps.rotation_number_digits(silver, 8).digits == (2,) * 8
    assert silver.tuning is not None


def test_tuning_rejects_bad_depth():
    with pytest.raises(BadInput):
        maps.tune_rotation(lambda a: maps.TrigBicritical(a, "0.2"), ContinuedFraction((1,)), 0)


def test_symmetric_map_has_half_measure(golden_pair):
    f, g = golden_pair
    for fmap in (f, g):
        sig = maps.signature(fmap, 14)
        assert abs(float(sig.deltas[0]) - 0.5) <= sig.error_bound


def test_drift_estimate_is_near_golden(golden):
    rho = (mpmath.sqrt(5) - 1) / 2
    assert abs(maps.drift_estimate(golden, 2000) - rho) < 1e-2


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(0.0, 1.0))
def test_trig_lift_is_increasing(a, u, b, x):
    f = maps.TrigBicritical(repr(a), repr(u), b=repr(b))
    d1 = f.derivs(x)[1]
    assert d1 >= -1e-25
    assert f.evaluate(x + 1e-3) > f.evaluate(x)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_float_jets_agree_with_mp(a, u, b):
    f = maps.TrigBicritical(repr(a), repr(u), b=repr(b))
    xs = np.linspace(0.01, 0.99, 7)
    jets = f.jets_float(xs)
    for j, x in enumerate(xs):
        d = f.derivs(x)
        for k in range(3):
            assert jets[k][j] == pytest.approx(float(d[k + 1]), rel=1e-9, abs=1e-9)


def test_frac_position_of_orbit(golden):
    orbit = maps.orbits_of(golden)[0]
    assert 0 <= frac(orbit.point(100)) < 1
    assert abs(orbit.point(5) - golden.iterate(orbit.base, 5)) < 1e-25
