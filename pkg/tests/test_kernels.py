import mpmath
import numpy as np
import pytest

from bicritical import kernels, maps


def _composition_offsets(fmap, base, steps, t):
    """Reference: iterate the lift in extended precision from base + t."""
    start = fmap.iterate(base, 0)
    x, y = start + mpmath.mpf(t), start
    for _ in range(steps):
        x, y = fmap.lift(x), fmap.lift(y)
    return float(x - y)


@pytest.mark.parametrize("b", ["0", "0.5"])
def test_trig_push_matches_extended_composition(b):
    f = maps.tune_golden_trig("0.2", 10, b=b)
    orbit = maps.orbits_of(f)[0]
    pts = orbit.segment(0, 13)
    t = np.array([1e-4, -2e-4, 3e-3])
    res = f.push(pts, t, order=1)
    for j, tj in enumerate(t):
        assert res[j, 0] == pytest.approx(_composition_offsets(f, orbit.base, 13, tj), rel=1e-9, abs=1e-15)


def test_numba_and_numpy_backends_agree():
    if kernels.backend() != "numba":
        pytest.skip("numba is disabled")
    f = maps.TrigBicritical("0.31", "0.2", b="0.3")
    orbit = maps.orbits_of(f)[0]
    s0, s1 = f.step_params(orbit.segment(0, 21))
    t = np.linspace(-1e-3, 1e-3, 9)
    args = (s0, s1, float(f.K), t, 3)
    fast = kernels.trig_push(*args, use_numba=True, alpha=float(f._alpha), b=float(f.b))
    slow = kernels.trig_push(*args, use_numba=False, alpha=float(f._alpha), b=float(f.b))
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-14)


def test_push_derivative_matches_chain_rule():
    f = maps.TrigBicritical("0.31", "0.2")
    orbit = maps.orbits_of(f)[0]
    pts = orbit.segment(0, 5)
    x0 = orbit.base + mpmath.mpf("0.01")
    d = mpmath.mpf(1)
    x = x0
    for _ in range(5):
        d *= f.derivs(x)[1]
        x = f.lift(x)
    res = f.push(pts, np.array([0.01]), order=1)
    assert res[0, 1] == pytest.approx(float(d), rel=1e-9)


def test_gauss_legendre_increment_integrates_polynomials():
    def df(s):
        return 3 * s ** 2

    assert kernels.gl_increment(df, 0.05) == pytest.approx(0.05 ** 3, rel=1e-13)
