"""Explicit multicritical circle-map families and parameter tuning.

Every map is given by a lift F with F(x + 1) = F(x) + 1.  Extended-precision
values come from :meth:`CircleMap.lift` and :meth:`CircleMap.derivs`; long
float64 compositions near a stored orbit come from :meth:`CircleMap.push`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from . import kernels
from .errors import (BadInput, BracketFailure, ConsistencyFailure, ConvergenceFailure,
                     DegenerateParameter, DepthExceeded, NotHomeomorphism, PeriodicOrbitDetected,
                     TuneFailure, WrongCriticalCount)
from .numerics import (CirclePoint, ContinuedFraction, frac, get_precision, machine_epsilon,
                       to_scalar, tolerance)
from .orbits import OrbitCache

FAMILIES = ("trig_bicritical", "arnold_multicritical", "blaschke_unicritical",
            "blaschke_bicritical", "conjugated")


def scalar_str(x) -> str:
    """Decimal string that reads back to the same binary value."""
    digits = mpmath.libmp.libmpf.repr_dps(mpmath.mp.prec)
    return mpmath.nstr(mpmath.mpf(x), digits, strip_zeros=False, min_fixed=-mpmath.inf,
                       max_fixed=mpmath.inf)


def _nearest_rem(x, period=1):
    """x minus the nearest multiple of ``period``, as a float."""
    x = mpmath.mpf(x)
    return float(x - period * mpmath.nint(x / period))


def compose_jets(outer, inner):
    """Derivatives of A(B(x)) from A's jet at B(x) and B's jet at x (orders 1..3)."""
    a1, a2, a3 = outer
    b1, b2, b3 = inner
    return a1 * b1, a2 * b1 * b1 + a1 * b2, a3 * b1 ** 3 + 3 * a2 * b1 * b2 + a1 * b3


def inverse_jets(jet):
    """Derivatives of the inverse at phi(x) from phi's jet at x."""
    p1, p2, p3 = jet
    s1 = 1 / p1
    s2 = -p2 * s1 ** 3
    s3 = -(p3 * s1 ** 3 + 3 * p2 * s1 * s2) * s1
    return s1, s2, s3


@dataclass(frozen=True)
class CriticalPoint:
    location: CirclePoint
    criticality: mpmath.mpf = field(default_factory=lambda: mpmath.mpf(3))


@dataclass
class TuningRecord:
    parameter: mpmath.mpf
    bracket: tuple
    steps: int
    widths: list
    target: ContinuedFraction
    depth: int


class CircleMap:
    """Base class: degree-one lift with closed-form derivatives to order 3."""

    family_id = "abstract"

    def __init__(self, params: dict, critical_points: Sequence[CriticalPoint]):
        self.params = dict(params)
        self.critical_points = tuple(sorted(critical_points, key=lambda c: c.location.lift))
        self.tuning: TuningRecord | None = None

    # -- extended precision -------------------------------------------------
    def lift(self, x) -> mpmath.mpf:
        raise NotImplementedError

    def derivs(self, x):
        """(F, DF, D2F, D3F) at x."""
        raise NotImplementedError

    def evaluate(self, x, order: int = 0) -> mpmath.mpf:
        if order not in (0, 1, 2, 3):
            raise BadInput("order must be 0, 1, 2 or 3")
        x = to_scalar(x)
        if order == 0:
            return self.lift(x)
        return self.derivs(x)[order]

    @property
    def crit_lifts(self) -> list:
        return [c.location.lift for c in self.critical_points]

    def inverse(self, y, max_iter: int = 600) -> mpmath.mpf:
        """Solve F(x) = y by safeguarded Newton inside a bisection bracket."""
        y = to_scalar(y)
        tol = tolerance(5)
        eps = machine_epsilon()
        x = 2 * y - self.lift(y)
        lo, hi = x - mpmath.mpf("0.25"), x + mpmath.mpf("0.25")
        while self.lift(lo) > y:
            lo -= mpmath.mpf("0.5")
        while self.lift(hi) < y:
            hi += mpmath.mpf("0.5")
        x = (lo + hi) / 2
        best, best_res = x, mpmath.inf
        width_before = hi - lo
        for it in range(max_iter):
            F, DF = self.derivs(x)[:2]
            res = F - y
            if abs(res) < best_res:
                best, best_res = x, abs(res)
            if res == 0 or hi - lo <= 4 * eps * (1 + abs(x)):
                break
            if res < 0:
                lo = x
            else:
                hi = x
            candidate = x - res / DF if DF > 0 else None
            if it % 3 == 2 and hi - lo > width_before / 2:
                candidate = None
            if it % 3 == 2:
                width_before = hi - lo
            if candidate is not None and lo < candidate < hi:
                x = candidate
            else:
                x = (lo + hi) / 2
        if best_res >= tol:
            raise ConvergenceFailure(f"inverse did not converge (residual {mpmath.nstr(best_res, 5)})")
        return best

    def iterate(self, x, n: int) -> mpmath.mpf:
        x = to_scalar(x)
        if n >= 0:
            for _ in range(n):
                x = self.lift(x)
        else:
            for _ in range(-n):
                x = self.inverse(x)
        return x

    # -- float64 offset propagation ------------------------------------------
    def step_params(self, points: Sequence):
        """Float data describing the reference points b_k used by :meth:`push_with`."""
        return np.array([float(b) for b in points])

    def push_with(self, params, t, order: int = 0) -> np.ndarray:
        """Offsets after len(points) steps; columns (t, D1, D2, D3, Schwarzian)."""
        xs = params

        def jets(k, tt):
            return self.jets_float(xs[k] + tt)

        def increment(k, tt):
            return kernels.gl_increment(lambda tau: self.jets_float(xs[k] + tau)[0], tt)

        return kernels.push_generic_np(len(xs), t, order, jets, increment)

    def push(self, points: Sequence, t, order: int = 0) -> np.ndarray:
        return self.push_with(self.step_params(points), np.atleast_1d(np.asarray(t, dtype=float)), order)

    def jets_float(self, x):
        """(DF, D2F, D3F) on a float array (sampling only)."""
        raise NotImplementedError

    # -- serialisation -----------------------------------------------------------
    def to_dict(self) -> dict:
        params = {}
        for key, value in self.params.items():
            if isinstance(value, mpmath.mpc):
                params[key] = [scalar_str(value.real), scalar_str(value.imag)]
            elif isinstance(value, int):
                params[key] = value
            else:
                params[key] = scalar_str(value)
        return {
            "family": self.family_id,
            "parameters": params,
            "critical_points": [{"location": scalar_str(c.location.lift),
                                 "criticality": scalar_str(c.criticality)}
                                for c in self.critical_points],
            "precision": get_precision(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __repr__(self) -> str:
        shown = ", ".join(f"{k}={mpmath.nstr(v, 12) if not isinstance(v, int) else v}"
                          for k, v in self.params.items())
        return f"<{self.family_id} {shown}>"


class TrigBicritical(CircleMap):
    """Trigonometric bicritical family with DF = K (cos 2pi(x-s) - u)^2 (1 + b cos 4pi(x-s)).

    The two critical points are the solutions of cos 2pi(x-s) = u, both
    cubic.  The shift s conjugates the map by the rotation x -> x + s.  The
    harmonic coefficient b (|b| < 1, default 0) changes the shape of the
    map without moving its critical points; with b = 0 the lift is
    F(x) = x + a + K[-(u/pi) sin 2pi(x-s) + sin 4pi(x-s)/(8 pi)], K = 2/(1+2u^2).
    """

    family_id = "trig_bicritical"

    def __init__(self, a, u, shift=0, b=0):
        a, u, shift, b = to_scalar(a), to_scalar(u), to_scalar(shift), to_scalar(b)
        if not -1 < u < 1:
            raise DegenerateParameter(f"u must lie strictly inside (-1, 1), got {mpmath.nstr(u, 10)}")
        if not -1 < b < 1:
            raise DegenerateParameter(f"b must lie strictly inside (-1, 1), got {mpmath.nstr(b, 10)}")
        self.a, self.u, self.shift, self.b = a, u, shift, b
        pi = mpmath.pi
        self.K = 1 / (mpmath.mpf(1) / 2 + u * u + b / 4)
        # Fourier coefficients of DF/K: cos 1..4 theta
        k1 = -u * (2 + b)
        k2 = mpmath.mpf(1) / 2 + b * (mpmath.mpf(1) / 2 + u * u)
        k3 = -u * b
        k4 = b / 4
        self._fourier = [(m, self.K * c / (2 * pi * m)) for m, c in ((1, k1), (2, k2), (3, k3), (4, k4)) if c != 0]
        alpha = mpmath.acos(u) / (2 * pi)
        self._alpha = alpha
        self._crit = (frac(shift + alpha), frac(shift - alpha))
        crits = [CriticalPoint(CirclePoint(c)) for c in self._crit]
        params = {"a": a, "u": u, "shift": shift}
        if b != 0:
            params["b"] = b
        super().__init__(params, crits)

    def lift(self, x):
        y = x - self.shift
        return x + self.a + mpmath.fsum(c * mpmath.sinpi(2 * m * y) for m, c in self._fourier)

    def derivs(self, x):
        x = to_scalar(x)
        y = x - self.shift
        s = mpmath.sinpi(2 * y)
        c = mpmath.cospi(2 * y)
        F = self.lift(x)
        w = c - self.u
        pi = mpmath.pi
        DF = self.K * w * w
        D2F = -4 * pi * self.K * w * s
        D3F = -8 * pi * pi * self.K * (w * c - s * s)
        if self.b != 0:
            c4, s4 = mpmath.cospi(4 * y), mpmath.sinpi(4 * y)
            m0 = 1 + self.b * c4
            m1 = -4 * pi * self.b * s4
            m2 = -16 * pi * pi * self.b * c4
            DF, D2F, D3F = DF * m0, D2F * m0 + DF * m1, D3F * m0 + 2 * D2F * m1 + DF * m2
        return F, DF, D2F, D3F

    def step_params(self, points):
        c0, c1 = self._crit
        s0 = np.array([_nearest_rem(b - c0) for b in points])
        s1 = np.array([_nearest_rem(b - c1) for b in points])
        return s0, s1

    def push_with(self, params, t, order=0):
        s0, s1 = params
        return kernels.trig_push(s0, s1, float(self.K), t, order, alpha=float(self._alpha), b=float(self.b))

    def jets_float(self, x):
        y = 2 * np.pi * (np.asarray(x, dtype=float) - float(self.shift))
        K, u, b = float(self.K), float(self.u), float(self.b)
        w = np.cos(y) - u
        s = np.sin(y)
        f1, f2, f3 = K * w * w, -4 * np.pi * K * w * s, -8 * np.pi ** 2 * K * (w * np.cos(y) - s * s)
        if b != 0:
            m0, m1, m2 = 1 + b * np.cos(2 * y), -4 * np.pi * b * np.sin(2 * y), -16 * np.pi ** 2 * b * np.cos(2 * y)
            f1, f2, f3 = f1 * m0, f2 * m0 + f1 * m1, f3 * m0 + 2 * f2 * m1 + f1 * m2
        return f1, f2, f3


class ArnoldMulticritical(CircleMap):
    """F(x) = x + a - sin(2 N pi x)/(2 N pi), with N cubic critical points j/N."""

    family_id = "arnold_multicritical"

    def __init__(self, a, N: int = 2):
        N = int(N)
        if N < 1:
            raise BadInput("N must be a positive integer")
        self.a = to_scalar(a)
        self.N = N
        crits = [CriticalPoint(CirclePoint(mpmath.mpf(j) / N)) for j in range(N)]
        super().__init__({"a": self.a, "N": N}, crits)

    def lift(self, x):
        return x + self.a - mpmath.sinpi(2 * self.N * x) / (2 * self.N * mpmath.pi)

    def derivs(self, x):
        x = to_scalar(x)
        N, pi = self.N, mpmath.pi
        s = mpmath.sinpi(2 * N * x)
        c = mpmath.cospi(2 * N * x)
        sh = mpmath.sinpi(N * x)
        return x + self.a - s / (2 * N * pi), 2 * sh * sh, 2 * N * pi * s, 4 * N * N * pi * pi * c

    def step_params(self, points):
        period = mpmath.mpf(1) / self.N
        return np.array([_nearest_rem(b, period) for b in points])

    def push_with(self, params, t, order=0):
        return kernels.arnold_push(params, self.N, t, order)

    def jets_float(self, x):
        x = np.asarray(x, dtype=float)
        N = self.N
        return (2 * np.sin(N * np.pi * x) ** 2, 2 * N * np.pi * np.sin(2 * N * np.pi * x),
                4 * N * N * np.pi ** 2 * np.cos(2 * N * np.pi * x))


class _BlaschkeBase(CircleMap):
    """Circle restriction of e^{2 pi i w} z^k prod_p (z - p)/(1 - conj(p) z).

    The lift is F(x) = w + x + (1/pi) sum_p [arg p + arg(1 - z/p)] with
    z = e^{2 pi i x}, continuous because |z/p| < 1.
    """

    def _setup(self, poles, omega):
        self.omega = to_scalar(omega)
        self.poles = [mpmath.mpc(p) for p in poles]
        for p in self.poles:
            if abs(p) <= 1:
                raise BadInput("Blaschke parameters must satisfy |p| > 1")
        self._arg_sum = sum(mpmath.arg(p) for p in self.poles)
        self._poles_f = np.array([complex(p) for p in self.poles])

    def lift(self, x):
        z = mpmath.expjpi(2 * x)
        total = self._arg_sum
        for p in self.poles:
            total += mpmath.arg(1 - z / p)
        return self.omega + x + total / mpmath.pi

    def derivs(self, x):
        x = to_scalar(x)
        z = mpmath.expjpi(2 * x)
        pi = mpmath.pi
        total = self._arg_sum
        d1 = mpmath.mpf(1)
        d2 = mpmath.mpf(0)
        d3 = mpmath.mpf(0)
        for p in self.poles:
            total += mpmath.arg(1 - z / p)
            w = p - z
            d1 -= 2 * mpmath.re(z / w)
            d2 -= 2 * mpmath.re(2j * pi * z * p / w ** 2)
            d3 += 8 * pi * pi * mpmath.re(p * z * (p + z) / w ** 3)
        return self.omega + x + total / pi, d1, d2, d3

    def jets_float(self, x):
        x = np.asarray(x, dtype=float)
        z = np.exp(2j * np.pi * x)
        d1 = np.ones_like(x)
        d2 = np.zeros_like(x)
        d3 = np.zeros_like(x)
        for p in self._poles_f:
            w = p - z
            d1 = d1 - 2 * np.real(z / w)
            d2 = d2 - 2 * np.real(2j * np.pi * z * p / w ** 2)
            d3 = d3 + 8 * np.pi ** 2 * np.real(p * z * (p + z) / w ** 3)
        return d1, d2, d3

    def _locate_critical_points(self, samples: int = 8192):
        xs = np.arange(samples) / samples
        d1 = self.jets_float(xs)[0]
        if d1.min() < -1e-9:
            raise NotHomeomorphism(f"DF reaches {d1.min():.3e} < 0")
        found = []
        for i in np.nonzero((d1 <= np.roll(d1, 1)) & (d1 < np.roll(d1, -1)))[0]:
            if d1[i] > 1e-3:
                continue
            guess = mpmath.mpf(xs[i])
            try:
                c = mpmath.findroot(lambda t: self.derivs(t)[2], guess, tol=tolerance(8) ** 2)
            except (ValueError, ZeroDivisionError):
                continue
            DF = self.derivs(c)[1]
            if DF < -tolerance(10):
                raise NotHomeomorphism(f"DF = {mpmath.nstr(DF, 5)} < 0 at a critical candidate")
            if abs(DF) <= tolerance(10):
                found.append(frac(c))
        uniq = []
        for c in sorted(found):
            if not uniq or abs(c - uniq[-1]) > mpmath.mpf(10) ** -10:
                uniq.append(c)
        return uniq


class BlaschkeUnicritical(_BlaschkeBase):
    """f(z) = e^{2 pi i w} z^2 (z - 3)/(1 - 3z); one cubic critical point at z = 1."""

    family_id = "blaschke_unicritical"

    def __init__(self, omega):
        self._setup([3], omega)
        super().__init__({"omega": self.omega}, [CriticalPoint(CirclePoint(0))])


class BlaschkeBicritical(_BlaschkeBase):
    """g(z) = e^{2 pi i w} z^3 (z - p)/(1 - conj(p) z) (z - q)/(1 - conj(q) z)."""

    family_id = "blaschke_bicritical"

    def __init__(self, p, q, omega):
        self._setup([p, q], omega)
        crits = self._locate_critical_points()
        if len(crits) != 2:
            raise WrongCriticalCount(f"expected 2 circle critical points, found {len(crits)}")
        super().__init__({"p": self.poles[0], "q": self.poles[1], "omega": self.omega},
                         [CriticalPoint(CirclePoint(c)) for c in crits])


class Rotation:
    """phi(x) = x + theta."""

    kind = "rotation"

    def __init__(self, theta):
        self.theta = to_scalar(theta)

    def value(self, x):
        return x + self.theta

    def jet(self, x):
        return mpmath.mpf(1), mpmath.mpf(0), mpmath.mpf(0)

    def inverse(self, y):
        return y - self.theta

    def float_params(self, a):
        return None

    def jets_float(self, params, s):
        one = np.ones_like(s)
        return one, 0 * one, 0 * one

    def increment_float(self, params, s):
        return np.array(s, dtype=float)

    def inverse_increment_float(self, params, t):
        return np.array(t, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "theta": scalar_str(self.theta)}


class FixingBump:
    """phi(x) = x + eps [sin pi(x - c0) sin pi(x - c1)]^2.

    phi fixes c0 and c1 with D phi = 1 there; it is a diffeomorphism for
    eps < 1/(2 pi).
    """

    kind = "fixing_bump"

    def __init__(self, c0, c1, eps="0.05"):
        self.c0, self.c1, self.eps = to_scalar(c0), to_scalar(c1), to_scalar(eps)
        if not 0 <= self.eps < 1 / (2 * mpmath.pi):
            raise BadInput("bump size must lie in [0, 1/(2 pi))")

    def _g(self, x):
        pi = mpmath.pi
        g = mpmath.sinpi(x - self.c0) * mpmath.sinpi(x - self.c1)
        arg = 2 * x - self.c0 - self.c1
        return g, pi * mpmath.sinpi(arg), 2 * pi * pi * mpmath.cospi(arg), -4 * pi ** 3 * mpmath.sinpi(arg)

    def value(self, x):
        g = mpmath.sinpi(x - self.c0) * mpmath.sinpi(x - self.c1)
        return x + self.eps * g * g

    def jet(self, x):
        g, g1, g2, g3 = self._g(x)
        e = self.eps
        return 1 + 2 * e * g * g1, 2 * e * (g1 * g1 + g * g2), 2 * e * (3 * g1 * g2 + g * g3)

    def inverse(self, y):
        x = to_scalar(y)
        tol = machine_epsilon() * 4
        for _ in range(100):
            step = (self.value(x) - y) / self.jet(x)[0]
            x -= step
            if abs(step) <= tol * (1 + abs(x)):
                break
        return x

    def float_params(self, a):
        return _nearest_rem(a - self.c0), _nearest_rem(a - self.c1)

    def jets_float(self, params, s):
        s0, s1 = params
        e = float(self.eps)
        g = np.sin(np.pi * (s0 + s)) * np.sin(np.pi * (s1 + s))
        arg = np.pi * (s0 + s1 + 2 * s)
        g1 = np.pi * np.sin(arg)
        g2 = 2 * np.pi ** 2 * np.cos(arg)
        g3 = -4 * np.pi ** 3 * np.sin(arg)
        return 1 + 2 * e * g * g1, 2 * e * (g1 * g1 + g * g2), 2 * e * (3 * g1 * g2 + g * g3)

    def increment_float(self, params, s):
        return kernels.gl_increment(lambda tau: self.jets_float(params, tau)[0], s)

    def inverse_increment_float(self, params, t):
        s = np.array(t, dtype=float)
        for _ in range(6):
            s = s - (self.increment_float(params, s) - t) / self.jets_float(params, s)[0]
        return s

    def to_dict(self):
        return {"kind": self.kind, "c0": scalar_str(self.c0), "c1": scalar_str(self.c1),
                "eps": scalar_str(self.eps)}


class ConjugatedMap(CircleMap):
    """G = phi o F o phi^{-1} for a circle diffeomorphism phi.

    Orbits of G are computed by iterating G itself, one conjugated step at a time.
    """

    family_id = "conjugated"

    def __init__(self, base: CircleMap, phi):
        self.base = base
        self.phi = phi
        crits = [CriticalPoint(CirclePoint(phi.value(c.location.lift)), c.criticality)
                 for c in base.critical_points]
        super().__init__({}, crits)

    def lift(self, x):
        return self.phi.value(self.base.lift(self.phi.inverse(x)))

    def derivs(self, x):
        x = to_scalar(x)
        a = self.phi.inverse(x)
        inv = inverse_jets(self.phi.jet(a))
        Fa, *fj = self.base.derivs(a)
        y = self.phi.value(Fa)
        j = compose_jets(self.phi.jet(Fa), compose_jets(fj, inv))
        return (y, *j)

    def step_params(self, points):
        steps = []
        for b in points:
            a = self.phi.inverse(b)
            Fa = self.base.lift(a)
            steps.append((self.phi.float_params(a), self.base.step_params([a]),
                          self.phi.float_params(Fa)))
        return steps

    def push_with(self, params, t, order=0):
        phi = self.phi
        last = {}

        def one_step(k, tt):
            pa, base_params, pf = params[k]
            s = phi.inverse_increment_float(pa, tt)
            res = self.base.push_with(base_params, s, 3 if order > 0 else 0)
            last[k] = (s, res)
            return s, res

        def jets(k, tt):
            pa, base_params, pf = params[k]
            s, res = one_step(k, tt)
            f_jet = (res[:, 1], res[:, 2], res[:, 3])
            inv = inverse_jets(phi.jets_float(pa, s))
            return compose_jets(phi.jets_float(pf, res[:, 0]), compose_jets(f_jet, inv))

        def increment(k, tt):
            pa, base_params, pf = params[k]
            res = last.pop(k)[1] if k in last else one_step(k, tt)[1]
            return phi.increment_float(pf, res[:, 0])

        return kernels.push_generic_np(len(params), t, order, jets, increment)

    def jets_float(self, x):
        raise NotImplementedError("use push for conjugated maps")

    def to_dict(self):
        d = super().to_dict()
        d["base"] = self.base.to_dict()
        d["phi"] = self.phi.to_dict()
        return d


# -- constructors ----------------------------------------------------------------

def make_trig_bicritical(a, u, shift=0, b=0) -> TrigBicritical:
    return TrigBicritical(a, u, shift, b)


def make_arnold_multicritical(a, N: int = 2) -> ArnoldMulticritical:
    return ArnoldMulticritical(a, N)


def make_blaschke_unicritical(omega) -> BlaschkeUnicritical:
    omega = to_scalar(omega)
    if not 0 <= omega < 1:
        raise BadInput("omega must lie in [0, 1)")
    return BlaschkeUnicritical(omega)


def make_blaschke_bicritical(p, q, omega) -> BlaschkeBicritical:
    omega = to_scalar(omega)
    if not 0 <= omega < 1:
        raise BadInput("omega must lie in [0, 1)")
    return BlaschkeBicritical(p, q, omega)


def blaschke_symmetric_parameter(theta, guess=None):
    """Pole p such that (p, conj p) has cubic critical points at x = +-theta.

    By the symmetry x -> -x of the pair (p, conj p) it is enough to make DF
    and D2F vanish at theta.
    """
    theta = to_scalar(theta)
    if guess is None:
        guess = mpmath.mpc(2, 0) * mpmath.expjpi(2 * theta) * mpmath.mpf("1.0")
    probe = _BlaschkeBase.__new__(_BlaschkeBase)

    def equations(re_p, im_p):
        p = mpmath.mpc(re_p, im_p)
        probe._setup([p, mpmath.conj(p)], 0)
        _, d1, d2, _ = probe.derivs(theta)
        return d1, d2

    re_p, im_p = mpmath.findroot(equations, (guess.real, guess.imag))
    return mpmath.mpc(re_p, im_p)


def make_conjugated(base: CircleMap, phi) -> ConjugatedMap:
    return ConjugatedMap(base, phi)


def rotated_copy(fmap: CircleMap, theta) -> CircleMap:
    """R_theta o f o R_-theta; exact within the trigonometric family."""
    theta = to_scalar(theta)
    if isinstance(fmap, TrigBicritical):
        return TrigBicritical(fmap.a, fmap.u, fmap.shift + theta, fmap.b)
    return ConjugatedMap(fmap, Rotation(theta))


def fixing_bump_partner(fmap: CircleMap, eps="0.05") -> ConjugatedMap:
    """Smooth conjugate of a bicritical map with the same critical set and signature."""
    if len(fmap.critical_points) != 2:
        raise BadInput("the fixing bump needs exactly two critical points")
    c0, c1 = fmap.crit_lifts
    return ConjugatedMap(fmap, FixingBump(c0, c1, eps))


def map_from_dict(d: dict) -> CircleMap:
    family = d.get("family")
    params = d.get("parameters", {})

    def val(x):
        if isinstance(x, list):
            return mpmath.mpc(mpmath.mpf(x[0]), mpmath.mpf(x[1]))
        return mpmath.mpf(x) if isinstance(x, str) else x

    if family == "trig_bicritical":
        return TrigBicritical(val(params["a"]), val(params["u"]), val(params.get("shift", "0")),
                              val(params.get("b", "0")))
    if family == "arnold_multicritical":
        return ArnoldMulticritical(val(params["a"]), int(params.get("N", 2)))
    if family == "blaschke_unicritical":
        return BlaschkeUnicritical(val(params["omega"]))
    if family == "blaschke_bicritical":
        return BlaschkeBicritical(val(params["p"]), val(params["q"]), val(params["omega"]))
    if family == "conjugated":
        base = map_from_dict(d["base"])
        phi = d["phi"]
        if phi["kind"] == "rotation":
            return ConjugatedMap(base, Rotation(mpmath.mpf(phi["theta"])))
        if phi["kind"] == "fixing_bump":
            return ConjugatedMap(base, FixingBump(mpmath.mpf(phi["c0"]), mpmath.mpf(phi["c1"]),
                                                  mpmath.mpf(phi["eps"])))
        raise BadInput(f"unknown conjugacy kind {phi['kind']!r}")
    raise BadInput(f"unknown map family {family!r}")


def map_from_json(text: str) -> CircleMap:
    return map_from_dict(json.loads(text))


def evaluate(fmap: CircleMap, x, order: int = 0):
    return fmap.evaluate(x, order)


def inverse(fmap: CircleMap, y):
    return fmap.inverse(y)


# -- rotation numbers ----------------------------------------------------------------

def _periodic_tolerance():
    return tolerance(8)


class _DigitReader:
    """Reads partial quotients from the sign pattern of F^q(c) - c - p.

    For a circle homeomorphism with rotation number rho, the sign of
    F^q(x) - x - p equals the sign of q rho - p for every x.  With
    eps_n = q_n rho - p_n, the digit a_n is the largest a for which
    eps_{n-1} + a eps_n keeps the sign of eps_{n-1}.  This is exactly the
    period of the pair extracted on the orbit of c.
    """

    def __init__(self, fmap: CircleMap, base, orbit: OrbitCache | None = None, max_digit: int = 10**6):
        self.map = fmap
        self.base = to_scalar(base)
        self.orbit = orbit or OrbitCache(fmap, self.base)
        self.max_digit = max_digit
        self.p_prev, self.q_prev, self.p, self.q = 1, 0, 0, 1
        self.sign_prev = -1
        self.digits: list[int] = []

    def sign(self, q: int, p: int) -> int:
        value = self.orbit.point(q) - self.base - p
        if abs(value) < _periodic_tolerance():
            raise PeriodicOrbitDetected(f"F^{q}(c) returns to c + {p} within tolerance")
        return 1 if value > 0 else -1

    def same_side(self, a: int) -> bool:
        return self.sign(self.q_prev + a * self.q, self.p_prev + a * self.p) == self.sign_prev

    def advance(self, a: int) -> None:
        self.digits.append(a)
        self.p, self.p_prev = a * self.p + self.p_prev, self.p
        self.q, self.q_prev = a * self.q + self.q_prev, self.q
        self.sign_prev = -self.sign_prev

    def next_digit(self) -> int:
        a = 1
        while self.same_side(a + 1):
            a += 1
            if a > self.max_digit:
                raise DepthExceeded(f"partial quotient exceeds {self.max_digit}")
        self.advance(a)
        return a

    def compare_digit(self, target: int) -> int:
        """-1, 0, +1: whether the map's next digit is below, equal to, or above ``target``."""
        if not self.same_side(target):
            return -1
        if self.same_side(target + 1):
            return 1
        self.advance(target)
        return 0


def rotation_number_digits(fmap: CircleMap, count: int, critical_index: int = 0,
                           orbit: OrbitCache | None = None, cross_check: bool = True) -> ContinuedFraction:
    """First ``count`` digits of the rotation number, read on the orbit of c_i."""
    base = fmap.crit_lifts[critical_index] if fmap.critical_points else mpmath.mpf(0)
    reader = _DigitReader(fmap, base, orbit)
    for _ in range(int(count)):
        reader.next_digit()
    cf = ContinuedFraction(tuple(reader.digits))
    if cross_check:
        n = max(reader.q, 1)
        drift = (reader.orbit.point(n) - reader.base) / n
        approx = mpmath.mpf(cf.p(len(cf))) / cf.q(len(cf))
        if abs(drift - approx) > mpmath.mpf(2) / n:
            raise ConsistencyFailure("digit sequence disagrees with the drift estimate")
    return cf


def drift_estimate(fmap: CircleMap, iterates: int = 10**4, x=None) -> mpmath.mpf:
    """(F^N(x) - x)/N."""
    x = to_scalar(fmap.crit_lifts[0] if x is None else x)
    return (fmap.iterate(x, iterates) - x) / iterates


def compare_rotation(fmap: CircleMap, digits: Sequence[int], orbit: OrbitCache | None = None) -> int:
    """Sign of rho(f) - rho(target), or 0 when the first len(digits) digits agree."""
    reader = _DigitReader(fmap, fmap.crit_lifts[0], orbit)
    for n, target in enumerate(digits):
        c = reader.compare_digit(int(target))
        if c:
            # A larger digit at an even position means a smaller number.
            return -c if n % 2 == 0 else c
    return 0


def tune_rotation(constructor: Callable, target: ContinuedFraction, depth: int,
                  lo=0, hi=1, margin: int = 4, max_steps: int = 400) -> CircleMap:
    """Bisect the translation parameter until the first depth + margin digits match.

    Targets shorter than depth + margin are extended periodically with
    their last digit.  The returned map carries a :class:`TuningRecord`.
    """
    depth = int(depth)
    if depth < 1:
        raise BadInput("depth must be positive")
    if max(target.digits) > 1000:
        raise BadInput("target digits must be at most 1000")
    digits = target.extended(depth + margin).digits[: depth + margin]
    lo, hi = to_scalar(lo), to_scalar(hi)
    widths = [hi - lo]

    def side(a):
        fmap = constructor(a)
        try:
            return compare_rotation(fmap, digits), fmap
        except PeriodicOrbitDetected:
            return None, fmap

    s_lo, m_lo = side(lo)
    s_hi, m_hi = side(hi)
    if s_lo == 0:
        m_lo.tuning = TuningRecord(lo, (lo, lo), 0, widths, target, depth)
        return m_lo
    if s_lo not in (-1, None) or s_hi not in (1, None):
        raise BracketFailure(f"rotation number at the bracket ends does not straddle the target "
                             f"(signs {s_lo}, {s_hi})")
    floor_width = tolerance(3)
    for step in range(1, max_steps + 1):
        mid = (lo + hi) / 2
        s, fmap = side(mid)
        if s == 0:
            fmap.tuning = TuningRecord(mid, (lo, hi), step, widths, target, depth)
            return fmap
        if s is None:
            # Exact periodic orbit: nudge off the rational parameter.
            mid = lo + (hi - lo) * mpmath.mpf("0.4999")
            s, fmap = side(mid)
            if s in (0, None):
                if s == 0:
                    fmap.tuning = TuningRecord(mid, (lo, hi), step, widths, target, depth)
                    return fmap
                raise TuneFailure("stuck on a periodic parameter", best=mid)
        if s < 0:
            lo = mid
        else:
            hi = mid
        widths.append(hi - lo)
        if hi - lo < floor_width:
            raise TuneFailure("bracket collapsed below working precision", best=mid)
    raise TuneFailure("bisection budget exhausted", best=(lo + hi) / 2)


# -- signatures ----------------------------------------------------------------

@dataclass(frozen=True)
class Signature:
    rho_digits: tuple
    N: int
    criticalities: tuple
    deltas: tuple
    error_bound: float
    level: int

    def as_dict(self) -> dict:
        return {"rho_digits": list(self.rho_digits), "N": self.N,
                "criticalities": [float(c) for c in self.criticalities],
                "deltas": [float(d) for d in self.deltas],
                "error_bound": self.error_bound, "level": self.level}


def signature(fmap: CircleMap, depth: int, orbit: OrbitCache | None = None) -> Signature:
    """Birkhoff counts of the orbit of c_0 in the arcs [c_i, c_{i+1}) at time q_depth."""
    depth = int(depth)
    crits = fmap.crit_lifts
    orbit = orbit or OrbitCache(fmap, crits[0])
    cf = rotation_number_digits(fmap, depth, orbit=orbit, cross_check=False)
    q = cf.q(depth)
    counts = [0] * len(crits)
    for k in range(q):
        y = frac(orbit.point(k) - crits[0])
        idx = 0
        for i in range(1, len(crits)):
            if y >= frac(crits[i] - crits[0]):
                idx = i
        counts[idx] += 1
    deltas = tuple(mpmath.mpf(c) / q for c in counts)
    return Signature(cf.digits, len(crits), tuple(c.criticality for c in fmap.critical_points),
                     deltas, 2.0 / q, depth)


def tune_signature(target_rho: ContinuedFraction, target_delta, depth: int,
                   u_range=("-0.99", "0.99"), max_steps: int = 40, rotation_depth: int | None = None,
                   verbose: Callable | None = None) -> CircleMap:
    """Tune the trigonometric family to rotation digits and the measure delta of [c_0, c_1).

    delta is increasing in u (it tends to 0 as u -> -1 and to 1 as u -> 1);
    this monotonicity is assumed, not proved.  The returned map carries the
    achieved delta and residual in ``delta_hat`` and ``delta_residual``.
    """
    target_delta = to_scalar(target_delta)
    if not 0 < target_delta < 1:
        raise BadInput("target delta must lie strictly inside (0, 1)")
    rotation_depth = rotation_depth or depth
    q_depth = target_rho.extended(depth).q(depth)
    tol = max(mpmath.mpf(2) / q_depth, mpmath.mpf("1e-4"))
    lo, hi = to_scalar(u_range[0]), to_scalar(u_range[1])
    best = None
    for _ in range(max_steps):
        u = (lo + hi) / 2
        fmap = tune_rotation(lambda a: TrigBicritical(a, u), target_rho, rotation_depth)
        delta = signature(fmap, depth).deltas[0]
        residual = abs(delta - target_delta)
        if verbose:
            verbose(u, delta)
        if best is None or residual < best[0]:
            best = (residual, u, fmap, delta)
        if residual <= tol:
            fmap.delta_hat = delta
            fmap.delta_residual = residual
            return fmap
        if delta < target_delta:
            lo = u
        else:
            hi = u
    raise TuneFailure(f"delta search stalled, best residual {mpmath.nstr(best[0], 5)}",
                      best={"u": best[1], "delta": best[3]})


GOLDEN = ContinuedFraction((1,))
SILVER = ContinuedFraction((2,))


def tune_golden_trig(u=0, depth: int = 16, b=0) -> CircleMap:
    """Trigonometric bicritical map with golden-mean rotation digits to depth + 4."""
    u, b = to_scalar(u), to_scalar(b)
    return tune_rotation(lambda a: TrigBicritical(a, u, 0, b), GOLDEN, depth)


def orbits_of(fmap: CircleMap):
    """Shared :class:`~bicritical.orbits.CriticalOrbits` of a map, created on first use."""
    from .orbits import CriticalOrbits

    orbits = getattr(fmap, "_orbits", None)
    if orbits is None:
        orbits = CriticalOrbits(fmap)
        fmap._orbits = orbits
    return orbits


def map_digits(fmap: CircleMap, count: int) -> ContinuedFraction:
    """Rotation digits of a map, computed once on the shared orbit of c_0 and cached."""
    cached = getattr(fmap, "_digit_cache", None)
    if cached is None or len(cached) < count:
        cached = rotation_number_digits(fmap, count, orbit=orbits_of(fmap)[0], cross_check=False)
        fmap._digit_cache = cached
    return ContinuedFraction(cached.digits[:count])
