"""Multicritical commuting pairs: extraction, period, renormalization and the d_k metric.

A pair (eta, xi) lives on I_xi = [eta(0), 0] and I_eta = [0, xi(0)].  Branches
are lazy: a branch extracted from a circle map pushes float offsets along
the stored orbit of the critical point, so values and derivatives come
from the exact chain rule rather than from sampled tables.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from .errors import (CapExceeded, ConsistencyFailure, DegenerateOrbit, NotRenormalizable)
from .maps import CircleMap, map_digits, orbits_of
from .numerics import frac, tolerance, to_scalar

PERIOD_CAP = 10**6
LATTICE_START = 512
LATTICE_CAP = 8192


class Branch:
    """One-dimensional map with derivatives to order three, evaluated on float arrays."""

    def jets(self, t, order: int = 1) -> tuple:
        """(value, D1, D2, D3) at the points t; derivatives beyond ``order`` may be zero."""
        raise NotImplementedError

    def value(self, t):
        return self.jets(np.atleast_1d(np.asarray(t, dtype=float)), 0)[0]

    def __call__(self, t):
        out = self.value(t)
        return float(out[0]) if np.ndim(t) == 0 else out

    def derivative(self, t):
        return self.jets(np.atleast_1d(np.asarray(t, dtype=float)), 1)[1]

    def inverse(self, y: float, lo: float, hi: float, iterations: int = 200) -> float:
        """Solve value(t) = y on [lo, hi] by bisection (the branch is increasing)."""
        f_lo = self(lo) - y
        if f_lo > 0:
            return lo
        if self(hi) - y < 0:
            return hi
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if self(mid) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


class CircleBranch(Branch):
    """t -> sigma (F^q(c + sigma t) - p - c) for a critical point c of a circle map."""

    def __init__(self, fmap: CircleMap, orbit, sigma: int, q: int, p: int):
        self.map = fmap
        self.orbit = orbit
        self.sigma = int(sigma)
        self.q = int(q)
        self.p = int(p)
        self.origin_value = sigma * (orbit.point(q) - p - orbit.base)
        self._v0 = float(self.origin_value)
        self._params = None

    @property
    def params(self):
        if self._params is None:
            self._params = self.map.step_params(self.orbit.segment(0, self.q))
        return self._params

    def jets(self, t, order=1):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        res = self.map.push_with(self.params, self.sigma * t, order)
        s = self.sigma
        return self._v0 + s * res[:, 0], res[:, 1], s * res[:, 2], res[:, 3]

    def eval_mp(self, t) -> mpmath.mpf:
        """Extended-precision value by direct iteration of the lift."""
        c = self.orbit.base
        x = self.map.iterate(c + self.sigma * to_scalar(t), self.q)
        return self.sigma * (x - self.p - c)


class ScaledBranch(Branch):
    """t -> lam * inner(t / lam); lam < 0 reflects."""

    def __init__(self, inner: Branch, lam):
        self.inner = inner
        self.lam = float(lam)
        if getattr(inner, "origin_value", None) is not None:
            self.origin_value = self.lam * float(inner.origin_value)

    def jets(self, t, order=1):
        lam = self.lam
        v, d1, d2, d3 = self.inner.jets(np.asarray(t, dtype=float) / lam, order)
        return lam * v, d1, d2 / lam, d3 / lam ** 2


class ComposedBranch(Branch):
    """parts[-1] o ... o parts[0]."""

    def __init__(self, parts: Sequence[Branch]):
        self.parts = list(parts)

    def jets(self, t, order=1):
        v = np.atleast_1d(np.asarray(t, dtype=float))
        y1 = np.ones_like(v)
        y2 = np.zeros_like(v)
        y3 = np.zeros_like(v)
        for part in self.parts:
            v, f1, f2, f3 = part.jets(v, order)
            if order > 0:
                y1, y2, y3 = f1 * y1, f2 * y1 * y1 + f1 * y2, f3 * y1 ** 3 + 3 * f2 * y1 * y2 + f1 * y3
        return v, y1, y2, y3


class SyntheticBranch(Branch):
    """Branch given by Python callables for value and derivatives (tests and toy pairs)."""

    def __init__(self, func: Callable, d1: Callable | None = None, d2: Callable | None = None,
                 d3: Callable | None = None):
        self.func, self.d1, self.d2, self.d3 = func, d1, d2, d3

    def jets(self, t, order=1):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        zero = np.zeros_like(t)
        out = [self.func(t)]
        for g in (self.d1, self.d2, self.d3):
            out.append(g(t) if g is not None else zero)
        return tuple(np.asarray(o, dtype=float) * np.ones_like(t) for o in out)


@dataclass
class CommutingPair:
    eta: Branch
    xi: Branch
    eta_crits: list = field(default_factory=lambda: [0.0])
    xi_crits: list = field(default_factory=lambda: [0.0])
    provenance: dict | None = None

    @property
    def eta0(self) -> float:
        """eta(0), the left end of I_xi."""
        v = getattr(self.eta, "origin_value", None)
        return float(v) if v is not None else float(self.eta(0.0))

    @property
    def xi0(self) -> float:
        """xi(0), the right end of I_eta."""
        v = getattr(self.xi, "origin_value", None)
        return float(v) if v is not None else float(self.xi(0.0))

    @property
    def ratio(self) -> float:
        return self.eta0 / self.xi0

    @property
    def critical_count(self) -> int:
        """N = N_1 + N_2 - 1 (the origin is shared)."""
        return len(self.eta_crits) + len(self.xi_crits) - 1

    @property
    def level(self):
        return None if self.provenance is None else self.provenance.get("level")


@dataclass
class NormalizedPair:
    pair: CommutingPair
    ratio: float

    def __getattr__(self, name):
        return getattr(self.pair, name)


def _as_pair(z) -> CommutingPair:
    return z.pair if isinstance(z, NormalizedPair) else z


def branch_critical_points(fmap: CircleMap, i: int, n: int) -> dict:
    """Critical points of the return pair at c_i, pulled back through the return words.

    Returns {"eta": [(t, label)], "xi": [(t, label)]} with labels (j, -k)
    naming f^{-k}(c_j); the origin is listed for both branches.
    """
    from .partitions import return_interval, standard_partition

    part = standard_partition(fmap, i, n)
    sigma = return_interval(fmap, i, n).side
    orbits = orbits_of(fmap)
    c = orbits[i].base
    out = {"eta": [(0.0, (i, 0))], "xi": [(0.0, (i, 0))]}
    slack = tolerance(8)
    for j, cj in enumerate(fmap.crit_lifts):
        if j == i:
            continue
        atom = part.atoms[part.locate(cj)]
        if frac(cj - part.base - atom.start + slack) < 2 * slack:
            raise DegenerateOrbit(f"c_{j} lies on the orbit of c_{i}")
        k = atom.iterate
        pre = orbits[j].point(-k)
        t = float(sigma * (pre - c - mpmath.nint(pre - c)))
        out["eta" if atom.kind == "long" else "xi"].append((t, (j, -k)))
    return out


def extract_pair(fmap: CircleMap, i: int, n: int) -> CommutingPair:
    """(f^{q_{n+1}}|I_n(c_i), f^{q_n}|I_{n+1}(c_i)) in the coordinate t = sigma (x - c_i).

    sigma = +1 or -1 is chosen so that I_n(c_i) lies on the positive side.
    """
    n = int(n)
    cf = map_digits(fmap, n + 2)
    orbit = orbits_of(fmap)[i]
    q_n, q_next = cf.q(n), cf.q(n + 1)
    sigma = 1 if (orbit.point(q_n) - orbit.base - cf.p(n)) > 0 else -1
    eta = CircleBranch(fmap, orbit, sigma, q_next, cf.p(n + 1))
    xi = CircleBranch(fmap, orbit, sigma, q_n, cf.p(n))
    crits = branch_critical_points(fmap, i, n)
    return CommutingPair(eta, xi, sorted(t for t, _ in crits["eta"]), sorted(t for t, _ in crits["xi"]),
                         {"map": fmap, "critical_index": i, "level": n, "labels": crits})


def validate_pair(z, samples: int = 1000) -> dict:
    """Check the pair axioms; returns a report with an ``ok`` flag.

    The matching of one-sided jets at the origin is checked at order one;
    the order-three discrepancy is reported but not enforced.
    """
    z = _as_pair(z)
    report = {}
    eta0, xi0 = z.eta0, z.xi0
    report["intervals"] = eta0 < 0 < xi0
    if isinstance(z.eta, CircleBranch) and isinstance(z.xi, CircleBranch):
        a = z.eta.eval_mp(z.xi.origin_value)
        b = z.xi.eval_mp(z.eta.origin_value)
        gap = float(abs(a - b))
        scale = float(abs(a)) if a != 0 else 1.0
    else:
        a, b = z.eta(xi0), z.xi(eta0)
        gap, scale = abs(a - b), abs(a) or 1.0
    report["commute_gap"] = gap
    report["commutes"] = gap <= max(1e-10 * scale, 1e-14) and a != 0
    mono = True
    for branch, lo, hi, crits in ((z.eta, 0.0, xi0, z.eta_crits), (z.xi, eta0, 0.0, z.xi_crits)):
        t = np.linspace(lo, hi, samples)
        d1 = branch.jets(t, 1)[1]
        values = branch.value(t)
        scale = max(float(np.max(np.abs(d1))), 1e-300)
        mono &= bool(np.all(d1 >= -1e-10 * scale)) and bool(np.all(np.diff(values) >= -1e-14 * abs(values).max()))
    report["monotone"] = mono
    je = z.eta.jets(np.array([0.0]), 3)
    jx = z.xi.jets(np.array([0.0]), 3)
    report["origin_critical"] = abs(je[1][0]) <= 1e-12 and abs(jx[1][0]) <= 1e-12
    report["origin_cubic"] = (abs(je[2][0]) <= 1e-8 * max(abs(je[3][0]), 1e-300)
                              and abs(jx[2][0]) <= 1e-8 * max(abs(jx[3][0]), 1e-300)
                              and je[3][0] != 0 and jx[3][0] != 0)
    # D^k_-(xi o eta)(0) against D^k_+(eta o xi)(0).
    d1_left = z.xi.derivative(eta0)[0] * je[1][0]
    d1_right = z.eta.derivative(xi0)[0] * jx[1][0]
    report["jet1_gap"] = float(abs(d1_left - d1_right))
    d3_left = z.xi.derivative(eta0)[0] * je[3][0]
    d3_right = z.eta.derivative(xi0)[0] * jx[3][0]
    report["jet3_relative_gap"] = float(abs(d3_left - d3_right) / max(abs(d3_left), abs(d3_right), 1e-300))
    report["ok"] = all(report[k] for k in ("intervals", "commutes", "monotone", "origin_critical")) \
        and report["jet1_gap"] <= 1e-10
    return report


def period(z, cap: int = PERIOD_CAP) -> int:
    """chi: the a with eta^{a+1}(xi(0)) < 0 <= eta^a(xi(0))."""
    z = _as_pair(z)
    x = z.xi0
    a = 0
    while True:
        y = float(z.eta(x))
        if y < 0:
            return a
        a += 1
        if a >= cap:
            raise CapExceeded(f"period exceeds the cap {cap}")
        if y == x:
            raise CapExceeded("eta has a fixed point in its domain; the period is infinite")
        x = y


def normalize(z) -> NormalizedPair:
    """Linear rescaling by 1/xi(0), so that xi(0) = 1 and eta(0) = eta(0)/xi(0)."""
    if isinstance(z, NormalizedPair):
        return z
    lam = 1.0 / z.xi0
    pair = _scaled_pair(z, lam)
    pair.xi.origin_value = 1.0
    pair.eta.origin_value = z.eta0 / z.xi0
    return NormalizedPair(pair, z.eta0 / z.xi0)


def _scaled_pair(z: CommutingPair, lam: float) -> CommutingPair:
    prov = None if z.provenance is None else dict(z.provenance)
    return CommutingPair(ScaledBranch(z.eta, lam), ScaledBranch(z.xi, lam),
                         sorted(lam * t for t in z.eta_crits), sorted(lam * t for t in z.xi_crits), prov)


def renormalize(z) -> NormalizedPair:
    """Normalization of (eta^a o xi | I_xi, eta | [0, eta^a(xi(0))]).

    The first slot acts on I_xi and the second on [0, eta^a(xi(0))], as for
    the pair extracted one level deeper; rescaling by 1/eta(0) < 0 reflects
    so that the new eta-slot acts on the positive side.
    """
    z = _as_pair(z)
    a = period(z)
    if a < 1:
        raise NotRenormalizable("period is zero")
    x_eta = float(z.xi(z.eta0))
    if not 0 <= x_eta <= z.xi0:
        raise NotRenormalizable("(xi o eta)(0) is not in I_eta")
    new_eta = ComposedBranch([z.xi] + [z.eta] * a)
    end = z.xi0
    for _ in range(a):
        end = float(z.eta(end))
    crits = list(z.xi_crits)
    # Preimages of eta's critical points under eta^k o xi, 0 <= k < a.
    for k in range(a):
        prefix = ComposedBranch([z.xi] + [z.eta] * k)
        for c in z.eta_crits:
            if c == 0.0 and k == 0:
                continue
            lo_val, hi_val = float(prefix(z.eta0)), float(prefix(0.0))
            if lo_val < c < hi_val:
                crits.append(prefix.inverse(c, z.eta0, 0.0))
    lam = 1.0 / z.eta0
    prov = None if z.provenance is None else {**z.provenance, "level": z.provenance.get("level", 0) + 1}
    eta_crits = sorted(lam * t for t in crits)
    xi_crits = sorted(lam * t for t in z.eta_crits if 0 <= t <= end)
    pair = CommutingPair(ScaledBranch(new_eta, lam), ScaledBranch(z.eta, lam), eta_crits, xi_crits, prov)
    pair.eta.origin_value = end * lam
    pair.xi.origin_value = 1.0
    return NormalizedPair(pair, end * lam)


class Mobius:
    """tau(x) = x/(alpha x + beta) with tau(eta0) = -1, tau(0) = 0, tau(xi0) = 1."""

    def __init__(self, eta0: float, xi0: float):
        self.alpha = (xi0 + eta0) / (xi0 - eta0)
        self.beta = -2 * xi0 * eta0 / (xi0 - eta0)

    def __call__(self, x):
        return x / (self.alpha * x + self.beta)

    def inverse(self, y):
        return self.beta * y / (1 - self.alpha * y)

    def derivative(self, x):
        return self.beta / (self.alpha * x + self.beta) ** 2


def lattice(M: int) -> np.ndarray:
    """Points (1 - cos(pi j/M))/2, j = 0..M, clustered at both ends of [0, 1]."""
    return 0.5 * (1 - np.cos(np.pi * np.arange(M + 1) / M))


def _strip_homothety(z: CommutingPair) -> CommutingPair:
    """Drop a positive rescaling shared by both branches; the conjugated graph does not see it.

    Evaluating through the wrapper costs a rounding of t / lam, which the
    Mobius normalization amplifies to a few ulps.
    """
    while (isinstance(z.eta, ScaledBranch) and isinstance(z.xi, ScaledBranch)
           and z.eta.lam == z.xi.lam and z.eta.lam > 0
           and getattr(z.eta.inner, "origin_value", None) is not None
           and getattr(z.xi.inner, "origin_value", None) is not None):
        z = CommutingPair(z.eta.inner, z.xi.inner, z.eta_crits, z.xi_crits, z.provenance)
    return z


def conjugated_graph(z, y_right, y_left) -> tuple:
    """tau o zeta o tau^{-1} and its derivative on y_left in [-1,0] and y_right in [0,1]."""
    z = _strip_homothety(_as_pair(z))
    tau = Mobius(z.eta0, z.xi0)
    vals, ders = [], []
    for branch, y in ((z.xi, y_left), (z.eta, y_right)):
        x = tau.inverse(y)
        h, d1 = branch.jets(x, 1)[:2]
        vals.append(tau(h))
        ders.append(tau.derivative(h) * d1 / tau.derivative(x))
    return np.concatenate(vals), np.concatenate(ders)


def _norms(z1, z2, M):
    y = lattice(M)
    g1, d1 = conjugated_graph(z1, y, -y)
    g2, d2 = conjugated_graph(z2, y, -y)
    return float(np.max(np.abs(g1 - g2))), float(np.max(np.abs(d1 - d2)))


def pair_distance(z1, z2, k: int = 0, M: int | None = None) -> float:
    """d_k: max of the ratio discrepancy and the C^k norm of the Mobius-conjugated difference.

    With M=None the lattice doubles from 512 points per side until the
    norm changes by less than 1% (capped at 8192).  The C^1 norm is the
    larger of the sup of the difference and the sup of its derivative.
    """
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    p1, p2 = _strip_homothety(_as_pair(z1)), _strip_homothety(_as_pair(z2))
    ratio_gap = abs(p1.ratio - p2.ratio)

    def norm(m):
        c0, c1 = _norms(p1, p2, m)
        return c0 if k == 0 else max(c0, c1)

    if M is not None:
        return max(ratio_gap, norm(M))
    m = LATTICE_START
    current = norm(m)
    while m < LATTICE_CAP:
        m *= 2
        nxt = norm(m)
        done = abs(nxt - current) <= 0.01 * max(abs(current), 1e-300)
        current = nxt
        if done:
            break
    return max(ratio_gap, current)


def scaling_ratio(fmap: CircleMap, i: int, n: int) -> mpmath.mpf:
    """s_n = |I_{n+1}(c_i)| / |I_n(c_i)|."""
    from .partitions import return_interval

    return return_interval(fmap, i, n + 1).length / return_interval(fmap, i, n).length


def pair_summary(z, reference=None) -> dict:
    """JSON-ready summary {level, ratio, period, critical_points, d0_vs, d1_vs}."""
    p = _as_pair(z)
    out = {"level": p.level, "ratio": p.ratio, "period": period(p),
           "critical_points": {"eta": list(p.eta_crits), "xi": list(p.xi_crits)},
           "d0_vs": None, "d1_vs": None}
    if reference is not None:
        out["d0_vs"] = pair_distance(z, reference, 0)
        out["d1_vs"] = pair_distance(z, reference, 1)
    return out


def pair_summary_json(z, reference=None) -> str:
    return json.dumps(pair_summary(z, reference), sort_keys=True)
