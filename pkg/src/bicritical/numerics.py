"""Extended-precision scalars, circle geometry on lifts and continued fractions.

Real quantities are ``mpmath.mpf`` values at a process-wide decimal
precision (30 digits by default).  Every depth-related limit elsewhere in
the package is derived from :func:`get_precision`.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import mpmath
import numpy as np

from .errors import BadInput, PrecisionExhausted, RationalInput

Scalar = mpmath.mpf

DEFAULT_PRECISION = 30
MIN_PRECISION = 15
MAX_PRECISION = 120

mpmath.mp.dps = DEFAULT_PRECISION


def get_precision() -> int:
    """Working precision in significant decimal digits."""
    return int(mpmath.mp.dps)


def set_precision(digits: int) -> None:
    digits = int(digits)
    if not MIN_PRECISION <= digits <= MAX_PRECISION:
        raise BadInput(f"precision must lie in [{MIN_PRECISION}, {MAX_PRECISION}], got {digits}")
    mpmath.mp.dps = digits


@contextmanager
def working_precision(digits: int) -> Iterator[None]:
    """Temporarily change the working precision."""
    old = get_precision()
    set_precision(digits)
    try:
        yield
    finally:
        mpmath.mp.dps = old


def machine_epsilon() -> mpmath.mpf:
    return mpmath.mpf(10) ** (-get_precision())


def tolerance(loss: float = 5) -> mpmath.mpf:
    """``10**-(P - loss)``: the accuracy left after losing ``loss`` digits."""
    return mpmath.mpf(10) ** (-(get_precision() - loss))


def to_scalar(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, str):
        return mpmath.mpf(x.strip())
    return mpmath.mpf(x)


def scalar_to_fraction(x) -> Fraction:
    """Exact binary value of a scalar as a Fraction."""
    man, exp = mpmath.mpf(x).man_exp
    if exp >= 0:
        return Fraction(int(man) << exp)
    return Fraction(int(man), 1 << (-exp))


def frac(x) -> mpmath.mpf:
    """Fractional part in [0, 1)."""
    x = mpmath.mpf(x)
    r = x - mpmath.floor(x)
    # a tiny negative x rounds to exactly 1
    return r if r < 1 else mpmath.mpf(0)


def circle_distance(x, y) -> mpmath.mpf:
    d = mpmath.mpf(x) - mpmath.mpf(y)
    return abs(d - mpmath.nint(d))


@dataclass(frozen=True)
class CirclePoint:
    """A point of the circle R/Z given by its lift in [0, 1)."""

    lift: mpmath.mpf

    def __post_init__(self):
        object.__setattr__(self, "lift", frac(to_scalar(self.lift)))

    def distance(self, other: "CirclePoint") -> mpmath.mpf:
        return circle_distance(self.lift, other.lift)

    def __float__(self) -> float:
        return float(self.lift)


@dataclass(frozen=True)
class Arc:
    """Oriented arc [left, left + length) of the circle."""

    left: CirclePoint
    length: mpmath.mpf

    def __post_init__(self):
        if not isinstance(self.left, CirclePoint):
            object.__setattr__(self, "left", CirclePoint(self.left))
        length = to_scalar(self.length)
        if not 0 < length < 1:
            raise BadInput(f"arc length must lie in (0, 1), got {mpmath.nstr(length, 8)}")
        object.__setattr__(self, "length", length)

    @property
    def right(self) -> CirclePoint:
        return CirclePoint(self.left.lift + self.length)

    def contains(self, x) -> bool:
        return frac(to_scalar(x) - self.left.lift) < self.length

    def contains_arc(self, other: "Arc", slack=0) -> bool:
        start = frac(other.left.lift - self.left.lift)
        if start > 1 - slack:
            start -= 1
        return start >= -slack and start + other.length <= self.length + slack


def convergents(digits: Sequence[int]) -> tuple[tuple[int, int], ...]:
    """Pairs (p_n, q_n) for n = 0..len(digits), with p_0/q_0 = 0/1."""
    out = [(0, 1)]
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    for a in digits:
        a = int(a)
        if a < 1:
            raise BadInput(f"partial quotients must be >= 1, got {a}")
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append((p, q))
    return tuple(out)


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients a_0, a_1, ... of rho = [a_0, a_1, ...] = 1/(a_0 + 1/(a_1 + ...))."""

    digits: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        digits = tuple(int(a) for a in self.digits)
        object.__setattr__(self, "digits", digits)
        object.__setattr__(self, "convergents", convergents(digits))

    def __len__(self) -> int:
        return len(self.digits)

    def q(self, n: int) -> int:
        return self.convergents[n][1]

    def p(self, n: int) -> int:
        return self.convergents[n][0]

    @property
    def denominators(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.convergents)

    def value(self) -> Fraction:
        """The finite continued fraction as an exact rational."""
        p, q = self.convergents[-1]
        return Fraction(p, q)

    def canonical(self) -> "ContinuedFraction":
        """Equivalent expansion without a trailing digit 1 (when longer than one digit)."""
        d = list(self.digits)
        if len(d) > 1 and d[-1] == 1:
            d.pop()
            d[-1] += 1
        return ContinuedFraction(tuple(d))

    def extended(self, length: int) -> "ContinuedFraction":
        """Pad periodically with the last digit up to ``length`` digits."""
        if not self.digits:
            raise BadInput("cannot extend an empty expansion")
        d = list(self.digits)
        while len(d) < length:
            d.append(d[-1])
        return ContinuedFraction(tuple(d))

    def to_scalar(self) -> mpmath.mpf:
        """Value of the expansion with the tail frozen as the last digit repeated forever."""
        if not self.digits:
            raise BadInput("empty expansion")
        last = self.digits[-1]
        tail = (-last + mpmath.sqrt(last * last + 4)) / 2
        y = tail
        for a in reversed(self.digits):
            y = 1 / (a + y)
        return y


def cf_of_rational(x: Fraction) -> ContinuedFraction:
    """Exact expansion of a rational in (0, 1], canonical (no trailing 1 unless x = 1)."""
    x = Fraction(x)
    if not 0 < x <= 1:
        raise BadInput("rational must lie in (0, 1]")
    digits = []
    while x:
        inv = 1 / x
        a = inv.numerator // inv.denominator
        digits.append(a)
        x = inv - a
    return ContinuedFraction(tuple(digits)).canonical()


def looks_rational(x, max_denominator: int = 10**6) -> Fraction | None:
    """Return p/q with q <= max_denominator within 10 ulps of x, if any."""
    exact = scalar_to_fraction(x)
    best = exact.limit_denominator(max_denominator)
    ulp = 10 * machine_epsilon() * max(1, abs(mpmath.mpf(x)))
    if abs(mpmath.mpf(best.numerator) / best.denominator - mpmath.mpf(x)) <= ulp:
        return best
    return None


def cf_digits(x, count: int, max_denominator: int = 10**6) -> ContinuedFraction:
    """First ``count`` partial quotients of x in (0, 1) by the Gauss map.

    A first-order error bound is carried along the Gauss orbit; a digit is
    accepted only when 1/y is farther from an integer than its uncertainty.
    """
    x = to_scalar(x)
    count = int(count)
    if count < 1:
        raise BadInput("count must be positive")
    if not 0 < x < 1:
        raise BadInput("x must lie in (0, 1)")
    if looks_rational(x, max_denominator) is not None:
        raise RationalInput(f"{mpmath.nstr(x, 20)} is rational to working precision")
    eps = machine_epsilon()
    y, err = x, 4 * eps
    digits = []
    for _ in range(count):
        if y <= err:
            raise PrecisionExhausted(f"only {len(digits)} digits certified")
        inv = 1 / y
        inv_err = err / (y * (y - err)) + 2 * eps * inv
        a = mpmath.floor(inv)
        if min(inv - a, a + 1 - inv) <= inv_err:
            raise PrecisionExhausted(f"only {len(digits)} digits certified")
        digits.append(int(a))
        y = inv - a
        err = inv_err + eps
    return ContinuedFraction(tuple(digits))


@dataclass(frozen=True)
class SetADiagnostics:
    """Finite-prefix diagnostics for the three growth conditions on the digits."""

    digits: tuple[int, ...]
    cesaro_log_means: tuple[float, ...]
    tail_ratios: tuple[float, ...]
    window_means: np.ndarray = field(repr=False, compare=False)
    omega_bound: Callable[[float], float] | None
    cond1_trend: float
    cond1_pass: bool
    cond2_pass: bool
    cond3_pass: bool | None
    cond3_worst_excess: float | None
    bounded_type_witness: float

    def window_mean(self, k: int, n: int) -> float:
        """(1/n) * sum_{j=k+1}^{k+n} log a_j, defined for 0 < n <= k."""
        if not 0 < n <= k or k + n >= len(self.digits):
            raise BadInput(f"window (k={k}, n={n}) outside the prefix")
        return float(self.window_means[k, n])

    def summary(self) -> dict:
        return {
            "length": len(self.digits),
            "cesaro_last": self.cesaro_log_means[-1],
            "cond1_trend": self.cond1_trend,
            "cond1_pass": self.cond1_pass,
            "cond2_pass": self.cond2_pass,
            "cond3_pass": self.cond3_pass,
            "bounded_type_witness": self.bounded_type_witness,
        }


def setA_diagnostics(digits: Sequence[int], omega: Callable[[float], float] | None = None,
                     trend_threshold: float = 0.25) -> SetADiagnostics:
    """Diagnostics for the set of rotation numbers with controlled digit growth.

    Condition (1) is judged by the slope of the Cesaro means of log a_j
    against log n over the second half of the prefix; condition (2) by
    whether (1/n) log a_n keeps decreasing; condition (3) against the
    supplied ``omega`` (all windows 0 < n <= k).  The constant function
    log(1 + max a_j) always witnesses condition (3) on a finite prefix.
    """
    digits = tuple(int(a) for a in digits)
    if not digits:
        raise BadInput("digits must be nonempty")
    if min(digits) < 1:
        raise BadInput("digits must be positive")
    size = len(digits)
    with mpmath.workdps(get_precision() + 10):
        mp_logs = [mpmath.log(a) for a in digits]
        running = mpmath.mpf(0)
        cesaro_list = []
        for n, value in enumerate(mp_logs, start=1):
            running += value
            cesaro_list.append(float(running / n))
    logs = np.array([float(v) for v in mp_logs])
    prefix = np.concatenate([[0.0], np.cumsum(logs)])
    counts = np.arange(1, size + 1)
    cesaro = np.array(cesaro_list)
    tails = tuple(logs[n] / n for n in range(1, size))

    windows = np.full((size, size), np.nan)
    for k in range(1, size):
        n = np.arange(1, min(k, size - 1 - k) + 1)
        if n.size:
            windows[k, n] = (prefix[k + n + 1] - prefix[k + 1]) / n

    half = size // 2
    if size >= 4 and half >= 2:
        xs = np.log(counts[half:])
        ys = cesaro[half:]
        slope = float(np.polyfit(xs, ys, 1)[0]) if np.ptp(xs) > 0 else 0.0
    else:
        slope = 0.0
    cond1 = bool(slope <= trend_threshold)

    if len(tails) >= 2:
        first = max(tails[: len(tails) // 2] or (0.0,))
        second = max(tails[len(tails) // 2:])
        cond2 = bool(second == 0.0 or second < first)
    else:
        cond2 = True

    cond3 = None
    worst = None
    if omega is not None:
        excess = -math.inf
        for k in range(1, size):
            for n in range(1, min(k, size - 1 - k) + 1):
                excess = max(excess, windows[k, n] - omega(n / k))
        worst = float(excess) if excess != -math.inf else 0.0
        cond3 = bool(worst <= 1e-12)
    return SetADiagnostics(
        digits=digits,
        cesaro_log_means=tuple(float(c) for c in cesaro),
        tail_ratios=tuple(float(t) for t in tails),
        window_means=windows,
        omega_bound=omega,
        cond1_trend=slope,
        cond1_pass=cond1,
        cond2_pass=cond2,
        cond3_pass=cond3,
        cond3_worst_excess=worst,
        bounded_type_witness=math.log(1 + max(digits)),
    )
