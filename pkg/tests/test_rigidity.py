import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicritical import finegrid, maps, rigidity
from bicritical.errors import BadInput, DomainMismatch, NearCriticalSample, OrderViolation


@pytest.fixture(scope="module")
def rotated(golden):
    return maps.rotated_copy(golden, "0.1")


def test_pairing_of_a_rotated_copy(golden, rotated):
    assert rigidity.detect_pairing(golden, rotated) == (0, 1)


def test_different_rotation_numbers_are_refused(golden, engineered):
    with pytest.raises(BadInput):
        rigidity.ConjugacyOnOrbits(golden, engineered)


def test_forced_wrong_pairing_is_caught(golden):
    with pytest.raises(OrderViolation):
        rigidity.ConjugacyOnOrbits(golden, golden, pairing=(1, 0))


def test_identity_conjugacy_gives_zero_series(golden):
    setup = rigidity.ConjugacyOnOrbits(golden, golden)
    battery = rigidity.rigidity_battery(setup, range(3, 8))
    for name in ("d0", "d1", "interval_ratio", "criterion", "key_estimate"):
        assert battery[name].identically_zero, name
    assert battery["holder"]["alpha"] == rigidity.ALPHA_CAP


def test_rotated_copy_series_vanish(golden, rotated):
    setup = rigidity.ConjugacyOnOrbits(golden, rotated)
    assert rigidity.criterion_statistics(setup, range(3, 9)).max_value() <= 1e-10
    assert rigidity.renorm_convergence(golden, rotated, 0, 1, range(3, 9), setup).max_value() <= 1e-10


def test_conjugacy_through_addresses(golden_pair):
    f, g = golden_pair
    setup = rigidity.ConjugacyOnOrbits(f, g)
    chain = setup.chain
    geo = chain.level(3)
    labels = [v.label for v in chain.aux(6).vertices if geo.j_here[0] <= geo.offset(v.label) <= geo.j_here[1]]
    for lab in labels:
        addr = finegrid.vertex_address(f, lab, 3, 3)
        assert abs(rigidity.conjugacy_eval(setup, addr) - setup(lab)) % 1 < 1e-9


def test_decay_series_fit_and_csv():
    series = rigidity.DecaySeries.from_values("toy", [(n, 3 * 0.5 ** n) for n in range(1, 12)])
    assert series.rate == pytest.approx(0.5, rel=1e-10)
    assert series.fit[0] == pytest.approx(3, rel=1e-8)
    assert series.claims_decay() and series.decreasing_from(4)
    lines = series.to_csv().splitlines()
    assert lines[0] == "n,value,fit_residual"
    assert lines[1].endswith(",")
    assert len(lines) == 12


def test_zero_series_makes_no_claim():
    series = rigidity.DecaySeries.from_values("zero", [(n, 0.0) for n in range(1, 10)])
    assert series.identically_zero and series.rate is None and not series.claims_decay()


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1e-3, 1e3), st.integers(8, 14))
def test_decay_fit_recovers_exact_geometric_series(rate, C, count):
    series = rigidity.DecaySeries.from_values("g", [(n, C * rate ** n) for n in range(count)])
    assert series.rate == pytest.approx(rate, rel=1e-8)
    assert series.fit_quality == pytest.approx(1.0, abs=1e-9)


def test_schwarzian_matches_finite_differences(golden):
    for j in (1, 2):
        for x in ("0.05", "0.41", "0.66"):
            co = rigidity.schwarzian(golden, x, j)
            fd = rigidity.schwarzian_finite_difference(golden, x, j)
            assert abs(co / fd - 1) < 1e-6


def test_schwarzian_is_negative_for_the_trig_family(golden):
    for x in np.linspace(0.01, 0.99, 23):
        assert rigidity.schwarzian(golden, repr(float(x)), 1) < 0


def test_schwarzian_refuses_critical_points(golden):
    with pytest.raises(NearCriticalSample):
        rigidity.schwarzian(golden, golden.crit_lifts[0], 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(0.0, 0.5))
def test_schwarzian_of_mobius_maps_vanishes(alpha, beta, gamma, x):
    m = rigidity.MobiusInterval(repr(alpha), repr(beta), repr(gamma), 1)
    assert abs(rigidity.schwarzian(m, repr(x), 1)) < 1e-20


def test_negativity_sweep(golden):
    sweep = rigidity.negativity_sweep(golden, range(1, 7), samples=64)
    assert sweep["n0"] is not None
    assert all(row["negative"] for row in sweep["rows"] if row["n"] >= sweep["n0"])


def test_three_domain_model_is_symmetric():
    apm = rigidity.AlmostParabolicMap.synthetic(eps="1e-4", length=3, x0="-0.02", symmetric=True)
    y = rigidity.yoccoz_check(apm)["y_hat"]
    assert y[0] == pytest.approx(y[2], rel=1e-12)
    assert y == pytest.approx([1 / 3, 4 / 3, 1 / 3], rel=1e-3)


def test_long_model_band():
    apm = rigidity.AlmostParabolicMap.synthetic()
    check = rigidity.yoccoz_check(apm)
    assert check["length"] == 275
    assert check["C"] <= 100
    assert apm.sampled_schwarzian() < 0


def test_yoccoz_on_engineered_bridges(engineered):
    chain = finegrid.chain_for(engineered)
    for bridge in chain.bridges(2):
        apm = rigidity.AlmostParabolicMap.from_bridge(engineered, bridge, chain)
        assert apm.length == bridge.count
        assert rigidity.yoccoz_check(apm)["C"] <= 100


def _bumped(apm, amplitude):
    amplitude = mpmath.mpf(amplitude)

    def psi(x):
        return apm.branch(x) + amplitude * mpmath.exp(-400 * x * x)

    return rigidity.AlmostParabolicMap.from_orbit(psi, apm.domains[0][0], apm.length)


def test_shadowing_zero_case():
    phi = rigidity.AlmostParabolicMap.synthetic()
    out = rigidity.shadowing_check(phi, phi, k_range=range(1, 20), samples=50)
    assert out["C"] == 0 and all(r["deviation"] == 0 for r in out["rows"])


def test_shadowing_constant_is_stable_under_smaller_perturbations():
    phi = rigidity.AlmostParabolicMap.synthetic()
    big = rigidity.shadowing_check(phi, _bumped(phi, "1e-6"), samples=200)
    small = rigidity.shadowing_check(phi, _bumped(phi, "1e-8"), samples=200)
    assert big["C"] < 10
    assert small["C"] == pytest.approx(big["C"], rel=0.05)


def test_shadowing_domain_checks():
    phi = rigidity.AlmostParabolicMap.synthetic()
    with pytest.raises(BadInput):
        rigidity.shadowing_check(phi, phi, k_range=[phi.length])
    short = rigidity.AlmostParabolicMap.synthetic(length=10)
    with pytest.raises(DomainMismatch):
        rigidity.shadowing_check(phi, short)


def test_holder_on_independent_pair(golden_pair):
    setup = rigidity.ConjugacyOnOrbits(*golden_pair)
    alpha, diag = rigidity.holder_estimate(setup, range(3, 10))
    assert 0 < alpha <= 1
    assert diag["band"][0] <= alpha <= diag["band"][1]


def test_manifest_is_stable_json(golden):
    setup = rigidity.ConjugacyOnOrbits(golden, golden)
    battery = rigidity.rigidity_battery(setup, range(3, 6))
    assert rigidity.manifest(setup, battery) == rigidity.manifest(setup, battery)
