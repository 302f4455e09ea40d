"""Two-map experiments around the conjugacy between bicritical maps with the same signature.

The conjugacy h is only ever evaluated on critical orbits, where it is
forced: h(f^k(c_i)) = g^k(c_i') for corresponding critical points.  Every
statistic below is a functional of such vertices, so no interpolation of h
enters the measurements.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np

from .errors import (AddressMissing, BadInput, DomainMismatch, NearCriticalSample, OrderViolation)
from .finegrid import (DEFAULT_CONFIG, AuxiliaryChain, Bridge, GridConfig, VertexAddress, chain_for,
                       free_critical_point)
from .maps import CircleMap, map_digits, orbits_of
from .numerics import circle_distance, frac, to_scalar
from .partitions import return_interval
from .renorm import extract_pair, normalize, pair_distance

DEFAULT_WINDOW = (3, 12)
FIT_DROP = 2
CLAIM_QUALITY = 0.9
CLAIM_POINTS = 6
NEAR_CRITICAL = 1e-8
ALPHA_CAP = 1.0


# ---------------------------------------------------------------------------
# The conjugacy on critical orbits
# ---------------------------------------------------------------------------

def _orbit_order(fmap: CircleMap, pairing: Sequence[int], count: int) -> list:
    """Labels (i, k), k < count, sorted by position relative to c_{pairing[0]}."""
    orbits = orbits_of(fmap)
    base = orbits[pairing[0]].base
    labels = [(i, k) for i in range(len(pairing)) for k in range(count)]
    return sorted(labels, key=lambda lab: frac(orbits[pairing[lab[0]]].point(lab[1]) - base))


def detect_pairing(f: CircleMap, g: CircleMap, count: int = 64) -> tuple:
    """A matching of critical points under which both orbit orders agree.

    The identity is preferred when several matchings work (for instance
    when both maps commute with a half turn).
    """
    n_crit = len(f.critical_points)
    if len(g.critical_points) != n_crit:
        raise BadInput("the maps have different numbers of critical points")
    reference = _orbit_order(f, tuple(range(n_crit)), count)
    for shift in range(n_crit):
        pairing = tuple((i + shift) % n_crit for i in range(n_crit))
        if _orbit_order(g, pairing, count) == reference:
            return pairing
    raise OrderViolation("no matching of critical points preserves the orbit order")


class ConjugacyOnOrbits:
    """h(f^k(c_i)) = g^k(c_{pairing[i]}), evaluated exactly on orbit labels."""

    def __init__(self, f: CircleMap, g: CircleMap, pairing: Sequence[int] | str = "auto",
                 config: GridConfig | None = None, digits: int = 12):
        if len(f.critical_points) != len(g.critical_points):
            raise BadInput("the maps have different numbers of critical points")
        if [c.criticality for c in f.critical_points] != [c.criticality for c in g.critical_points]:
            raise BadInput("the criticalities of the two maps differ")
        if map_digits(f, digits).digits[:digits] != map_digits(g, digits).digits[:digits]:
            raise BadInput("the rotation digits of the two maps differ")
        self.f, self.g = f, g
        self.config = config or DEFAULT_CONFIG
        self.pairing = detect_pairing(f, g) if pairing == "auto" else tuple(pairing)
        if sorted(self.pairing) != list(range(len(f.critical_points))):
            raise BadInput(f"pairing {self.pairing} is not a permutation of the critical indices")
        if pairing != "auto":
            reference = _orbit_order(f, tuple(range(len(self.pairing))), 64)
            if _orbit_order(g, self.pairing, 64) != reference:
                raise OrderViolation(f"pairing {self.pairing} does not preserve the joint orbit order")

    @property
    def chain(self) -> AuxiliaryChain:
        return chain_for(self.f, self.config)

    def source(self, label) -> mpmath.mpf:
        i, k = label
        return orbits_of(self.f)[i].point(k)

    def __call__(self, label) -> mpmath.mpf:
        i, k = label
        return orbits_of(self.g)[self.pairing[i]].point(k)

    def images(self, labels: Iterable) -> list:
        return [self(lab) for lab in labels]

    def check_order(self, labels: Sequence) -> None:
        """Raise OrderViolation unless h keeps the cyclic order of the labels."""
        labels = list(labels)
        if len(labels) < 3:
            return
        base_f, base_g = self.source(labels[0]), self(labels[0])
        by_f = sorted(labels, key=lambda lab: frac(self.source(lab) - base_f))
        by_g = sorted(labels, key=lambda lab: frac(self(lab) - base_g))
        if by_f != by_g:
            bad = next(a for a, b in zip(by_f, by_g) if a != b)
            raise OrderViolation(f"h does not preserve the order of the vertices near {bad}")

    def to_dict(self) -> dict:
        return {"f": self.f.to_dict(), "g": self.g.to_dict(), "pairing": list(self.pairing)}


def _initial_label(setup: ConjugacyOnOrbits, address: VertexAddress) -> tuple:
    kind, m = address.initial
    if kind == "c0":
        return (0, 0)
    if kind == "return_c0":
        return (0, setup.chain.level(m).q2)
    if kind == "free":
        return free_critical_point(setup.f, m).label
    raise AddressMissing(f"unknown initial point kind {kind!r}")


def conjugacy_eval(setup: ConjugacyOnOrbits, address: VertexAddress) -> mpmath.mpf:
    """h(v) by replaying the address of v under g from the matching initial point."""
    if address is None:
        raise AddressMissing("no address given")
    x = setup(_initial_label(setup, address))
    for e in reversed(address.exponent(setup.f)):
        x = setup.g.iterate(x, e)
    direct = setup(address.label)
    if circle_distance(x, direct) > mpmath.mpf("1e-9"):
        raise OrderViolation(f"replay of {address.label} under g lands "
                             f"{mpmath.nstr(circle_distance(x, direct), 5)} away from the orbit point")
    return x


# ---------------------------------------------------------------------------
# Decay series
# ---------------------------------------------------------------------------

@dataclass
class DecaySeries:
    """Values y_n with a least-squares fit log y_n = log C + n log(rate)."""

    name: str
    values: list
    fit: tuple | None = None
    fit_quality: float | None = None
    window: tuple | None = None
    residuals: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, name: str, values: Iterable, drop: int = FIT_DROP, extras: dict | None = None):
        series = cls(name, [(int(n), float(y)) for n, y in values], extras=extras or {})
        series.refit(drop)
        return series

    def refit(self, drop: int = FIT_DROP) -> None:
        pts = [(n, y) for n, y in self.values[drop:] if y > 0 and math.isfinite(y)]
        self.fit, self.fit_quality, self.residuals = None, None, {}
        self.window = (pts[0][0], pts[-1][0]) if pts else None
        if len(pts) < 2:
            return
        n = np.array([p[0] for p in pts], dtype=float)
        ly = np.log([p[1] for p in pts])
        slope, intercept = np.polyfit(n, ly, 1)
        pred = intercept + slope * n
        ss_tot = float(np.sum((ly - ly.mean()) ** 2))
        ss_res = float(np.sum((ly - pred) ** 2))
        self.fit = (float(math.exp(intercept)), float(math.exp(slope)))
        self.fit_quality = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        self.residuals = {int(k): float(r) for k, r in zip(n, ly - pred)}

    @property
    def identically_zero(self) -> bool:
        return all(y == 0 for _, y in self.values)

    @property
    def rate(self) -> float | None:
        return None if self.fit is None else self.fit[1]

    @property
    def fit_points(self) -> int:
        return len(self.residuals)

    def claims_decay(self) -> bool:
        """rate < 1, claimed only with enough points and a good fit."""
        return (self.fit is not None and self.fit_points >= CLAIM_POINTS
                and self.fit_quality >= CLAIM_QUALITY and self.fit[1] < 1)

    def max_value(self) -> float:
        return max(y for _, y in self.values)

    def decreasing_from(self, start: int) -> bool:
        ys = [y for n, y in self.values if n >= start]
        return all(b < a for a, b in zip(ys, ys[1:]))

    def to_dict(self) -> dict:
        return {"name": self.name, "values": [[n, y] for n, y in self.values],
                "C": None if self.fit is None else self.fit[0], "rate": self.rate,
                "quality": self.fit_quality, "window": None if self.window is None else list(self.window),
                "claims_decay": self.claims_decay(), "identically_zero": self.identically_zero}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "value", "fit_residual"])
        for n, y in self.values:
            r = self.residuals.get(n)
            writer.writerow([n, repr(y), "" if r is None else repr(r)])
        return buf.getvalue()


def _levels(n_range) -> list:
    if n_range is None:
        return list(range(DEFAULT_WINDOW[0], DEFAULT_WINDOW[1] + 1))
    return [int(n) for n in n_range]


# ---------------------------------------------------------------------------
# Smoothness criterion on the fine grid
# ---------------------------------------------------------------------------

def _image_lengths(setup: ConjugacyOnOrbits, atoms) -> list:
    return [frac(setup(a.right.label) - setup(a.left.label)) for a in atoms]


def _source_lengths(setup: ConjugacyOnOrbits, atoms) -> list:
    # same formula as the image side, so that g = f gives exactly zero deviations
    return [frac(setup.source(a.right.label) - setup.source(a.left.label)) for a in atoms]


def criterion_statistics(setup: ConjugacyOnOrbits, n_range=None, bins: int = 20) -> DecaySeries:
    """y_n = max over adjacent Q_n atoms I, J of | |I|/|J| - |h(I)|/|h(J)| |."""
    rows, histograms, image_ratio = [], {}, {}
    for n in _levels(n_range):
        grid = setup.chain.grid(n)
        setup.check_order(grid.labels)
        src = _source_lengths(setup, grid.atoms)
        img = _image_lengths(setup, grid.atoms)
        devs = []
        ratios = []
        for j in range(len(src)):
            k = (j + 1) % len(src)
            devs.append(float(abs(src[j] / src[k] - img[j] / img[k])))
            ratios.append(float(max(img[j] / img[k], img[k] / img[j])))
        devs = np.array(devs)
        counts, edges = np.histogram(devs, bins=bins)
        histograms[n] = {"counts": counts.tolist(), "edges": [float(e) for e in edges]}
        image_ratio[n] = max(ratios)
        rows.append((n, float(devs.max())))
    return DecaySeries.from_values("criterion", rows,
                                   extras={"histograms": histograms, "image_adjacent_ratio": image_ratio})


# ---------------------------------------------------------------------------
# Renormalization and interval ratios
# ---------------------------------------------------------------------------

def _partner_index(setup_or_pairing, i: int) -> int:
    if isinstance(setup_or_pairing, ConjugacyOnOrbits):
        return setup_or_pairing.pairing[i]
    if setup_or_pairing is None:
        return i
    return tuple(setup_or_pairing)[i]


def renorm_convergence(f: CircleMap, g: CircleMap, critical_index: int = 0, k: int = 0, n_range=None,
                       pairing=None, M: int | None = None) -> DecaySeries:
    """y_n = d_k(R^n f, R^n g) on the normalized return pairs at the matched critical points."""
    j = _partner_index(pairing, critical_index)
    rows = []
    for n in _levels(n_range):
        zf = normalize(extract_pair(f, critical_index, n))
        zg = normalize(extract_pair(g, j, n))
        rows.append((n, pair_distance(zf, zg, k, M)))
    return DecaySeries.from_values(f"d{k}", rows, extras={"critical_index": critical_index})


def _return_lengths(fmap: CircleMap, i: int, levels: Iterable[int]) -> dict:
    orbit = orbits_of(fmap)[i]
    return {n: return_interval(fmap, i, n, orbit=orbit).length for n in levels}


def interval_ratio_series(f: CircleMap, g: CircleMap, critical_index: int = 0, n_range=None,
                          pairing=None, limit_offset: int = 4, cross_check_max: int = 10) -> dict:
    """Raw and normalized | |I_n^g| / |I_n^f| - 1 |.

    The normalization divides the ratio by its limit, estimated by the
    ratio ``limit_offset`` levels below the deepest level of the window.
    """
    levels = _levels(n_range)
    j = _partner_index(pairing, critical_index)
    deep = max(levels) + limit_offset
    extra = sorted(set(levels) | set(range(1, cross_check_max + 1)) | {deep})
    lf = _return_lengths(f, critical_index, extra)
    lg = _return_lengths(g, j, extra)
    ratio = {n: lg[n] / lf[n] for n in extra}
    limit = ratio[deep]
    raw = DecaySeries.from_values("interval_ratio_raw", [(n, abs(ratio[n] - 1)) for n in levels])
    norm = DecaySeries.from_values("interval_ratio", [(n, abs(ratio[n] / limit - 1)) for n in levels],
                                   extras={"limit": float(limit), "limit_level": deep})
    # cross-check |I_m^f|/|I_k^f| - |I_m^g|/|I_k^g| against C mu^min(m,k) |I_m^f|/|I_k^f|
    worst = 0.0
    violations = 0
    pairs = 0
    C, mu = norm.fit if norm.fit is not None else (0.0, 0.0)
    for m in range(1, cross_check_max + 1):
        for kk in range(1, cross_check_max + 1):
            if m == kk:
                continue
            rf = lf[m] / lf[kk]
            lhs = float(abs(rf - lg[m] / lg[kk]))
            scale = float(rf) * mu ** min(m, kk) if mu > 0 else 0.0
            pairs += 1
            if scale > 0:
                worst = max(worst, lhs / scale)
            if lhs > C * scale + 1e-30:
                violations += 1
    cross = {"pairs": pairs, "violations_with_fitted_C": violations, "empirical_C": worst,
             "fitted_C": C, "rate": mu}
    return {"raw": raw, "normalized": norm, "cross_check": cross}


# ---------------------------------------------------------------------------
# Key estimate and the free critical point
# ---------------------------------------------------------------------------

def _J_length(fmap: CircleMap, i: int, n: int):
    orbit = orbits_of(fmap)[i]
    return return_interval(fmap, i, n, orbit=orbit).length + return_interval(fmap, i, n + 1, orbit=orbit).length


def _signed(x):
    return x - mpmath.nint(x)


def key_estimate_series(setup: ConjugacyOnOrbits, n_range=None, p: int = 2,
                        d1_series: DecaySeries | None = None, criticality: int = 3) -> DecaySeries:
    """y_n = max over P^_{n+p} vertices v in J_n(c_0) of the rescaled deviation of h from the identity.

    The deviation is |(v - c_0^f)/|J_n^f| - (h(v) - c_0^g)/|J_n^g||.  The
    distance between the rescaled free critical points of f and g is also
    recorded, next to d_1(R^n f, R^n g)^(1/d) when ``d1_series`` is given.
    """
    chain = setup.chain
    f, g = setup.f, setup.g
    c0f, c0g = setup.source((0, 0)), setup((0, 0))
    rows, free_rows, counts = [], [], {}
    d1 = dict(d1_series.values) if d1_series is not None else {}
    for n in _levels(n_range):
        geo = chain.level(n)
        aux = chain.aux(n + p)
        jf, jg = _J_length(f, 0, n), _J_length(g, setup.pairing[0], n)
        lo, hi = geo.j_here
        worst = mpmath.mpf(0)
        inside = []
        for v in aux.vertices:
            t = geo.offset(v.label)
            if not lo <= t <= hi:
                continue
            inside.append(v.label)
            tg = _signed(setup(v.label) - c0g)
            worst = max(worst, abs(t / jf - tg / jg))
        setup.check_order(inside)
        counts[n] = len(inside)
        rows.append((n, float(worst)))
        fp = free_critical_point(f, n)
        xf = _signed(setup.source(fp.label) - c0f) / return_interval(f, 0, n).length
        xg = _signed(setup(fp.label) - c0g) / return_interval(g, setup.pairing[0], n).length
        entry = {"n": n, "distance": float(abs(xf - xg))}
        if n in d1:
            entry["d1_root"] = d1[n] ** (1.0 / criticality)
        free_rows.append(entry)
    return DecaySeries.from_values("key_estimate", rows, extras={"vertices": counts, "free_point": free_rows,
                                                                 "p": p})


# ---------------------------------------------------------------------------
# Schwarzian derivative
# ---------------------------------------------------------------------------

class MobiusInterval:
    """x -> (alpha x + beta)/(gamma x + delta), a test map with zero Schwarzian derivative."""

    crit_lifts: list = []

    def __init__(self, alpha=1, beta=0, gamma="0.1", delta=1):
        self.alpha, self.beta, self.gamma, self.delta = (to_scalar(v) for v in (alpha, beta, gamma, delta))
        self.det = self.alpha * self.delta - self.beta * self.gamma
        if self.det == 0:
            raise BadInput("degenerate Mobius map")

    def lift(self, x):
        return (self.alpha * x + self.beta) / (self.gamma * x + self.delta)

    def derivs(self, x):
        x = to_scalar(x)
        w = self.gamma * x + self.delta
        return (self.lift(x), self.det / w ** 2, -2 * self.gamma * self.det / w ** 3,
                6 * self.gamma ** 2 * self.det / w ** 4)


def _near_critical(fmap, x) -> bool:
    for c in getattr(fmap, "crit_lifts", []):
        if circle_distance(x, c) < NEAR_CRITICAL:
            return True
    return False


def schwarzian(fmap, x, j: int) -> mpmath.mpf:
    """S f^j(x) by the cocycle rule S(f o g) = (Sf o g)(Dg)^2 + Sg along the orbit."""
    if j < 1:
        raise BadInput("j must be positive")
    x = to_scalar(x)
    total = mpmath.mpf(0)
    dk = mpmath.mpf(1)
    for _ in range(int(j)):
        if _near_critical(fmap, x):
            raise NearCriticalSample(f"orbit passes within {NEAR_CRITICAL} of a critical point")
        F, d1, d2, d3 = fmap.derivs(x)
        total += (d3 / d1 - mpmath.mpf(3) / 2 * (d2 / d1) ** 2) * dk * dk
        dk *= d1
        x = F
    return total


def schwarzian_finite_difference(fmap, x, j: int) -> mpmath.mpf:
    """S f^j(x) from numerical derivatives of the composed lift (an independent oracle)."""
    x = to_scalar(x)

    def comp(t):
        for _ in range(int(j)):
            t = fmap.lift(t)
        return t

    d1, d2, d3 = (mpmath.diff(comp, x, k) for k in (1, 2, 3))
    return d3 / d1 - mpmath.mpf(3) / 2 * (d2 / d1) ** 2


def _sample_schwarzian(fmap: CircleMap, orbit, sigma: int, length: float, steps: int, samples: int):
    """max over interior sample points of I and over 1 <= j <= steps of S f^j, in float arithmetic."""
    s = (np.arange(samples) + 0.5) / samples
    crits = fmap.crit_lifts
    resampled = 0
    for attempt in range(4):
        t = sigma * length * s
        S = np.zeros(samples)
        D = np.ones(samples)
        worst = np.full(samples, -np.inf)
        near = np.zeros(samples, dtype=bool)
        for k in range(steps):
            b = orbit.point(k)
            for c in crits:
                off = float(_signed(b - c))
                near |= np.abs(off + t) < NEAR_CRITICAL
            res = fmap.push([b], t, order=3)
            with np.errstate(invalid="ignore"):
                S = S + res[:, 4] * D * D
            D = D * res[:, 1]
            worst = np.maximum(worst, S)
            t = res[:, 0]
        if not near.any():
            return float(np.nanmax(worst)), resampled
        resampled += int(near.sum())
        s = np.where(near, s + 0.25 / samples, s)
    raise NearCriticalSample("samples keep hitting critical orbits")


def negativity_sweep(fmap: CircleMap, n_range=None, samples: int = 256) -> dict:
    """Sampled sup of S f^j on I_n(c_0) (j <= q_{n+1}) and on I_{n+1}(c_0) (j <= q_n)."""
    levels = _levels(n_range if n_range is not None else range(1, 13))
    cf = map_digits(fmap, max(levels) + 3)
    orbit = orbits_of(fmap)[0]
    rows = []
    for n in levels:
        out = {"n": n}
        total_resampled = 0
        for name, level, steps in (("I_n", n, cf.q(n + 1)), ("I_next", n + 1, cf.q(n))):
            ri = return_interval(fmap, 0, level, orbit=orbit)
            sup, resampled = _sample_schwarzian(fmap, orbit, ri.side, float(ri.length), steps, samples)
            out[f"sup_{name}"] = sup
            total_resampled += resampled
        out["negative"] = out["sup_I_n"] < 0 and out["sup_I_next"] < 0
        out["resampled"] = total_resampled
        rows.append(out)
    n0 = None
    for k in range(len(rows)):
        if all(r["negative"] for r in rows[k:]):
            n0 = rows[k]["n"]
            break
    return {"rows": rows, "n0": n0, "samples": samples}


# ---------------------------------------------------------------------------
# Almost parabolic maps
# ---------------------------------------------------------------------------

@dataclass
class AlmostParabolicMap:
    """A diffeomorphism sending each fundamental domain J_nu to J_{nu+1}.

    ``domains`` lists J_1 .. J_l as (a, b) pairs with b the endpoint shared
    with J_{nu+1}; J_{l+1} = branch(J_l) is not stored.
    """

    branch: Callable
    domains: list
    schwarzian: Callable | None = None

    @property
    def length(self) -> int:
        return len(self.domains)

    @property
    def lengths(self) -> list:
        return [abs(b - a) for a, b in self.domains]

    @property
    def hull(self) -> tuple:
        ends = [self.domains[0][0], self.domains[-1][1]]
        return min(ends), max(ends)

    @property
    def total(self):
        lo, hi = self.hull
        return hi - lo

    @property
    def width(self) -> float:
        ls = self.lengths
        return float(min(ls[0], ls[-1]) / self.total)

    def contains_first(self, x) -> bool:
        a, b = self.domains[0]
        return min(a, b) <= x <= max(a, b)

    @classmethod
    def from_orbit(cls, branch: Callable, x0, length: int, schwarzian: Callable | None = None):
        x0 = to_scalar(x0)
        pts = [x0]
        for _ in range(int(length)):
            pts.append(branch(pts[-1]))
        steps = [b - a for a, b in zip(pts, pts[1:])]
        if not (all(s > 0 for s in steps) or all(s < 0 for s in steps)):
            raise BadInput("the orbit of x0 is not monotone, so it does not cut fundamental domains")
        return cls(branch, list(zip(pts, pts[1:])), schwarzian)

    @classmethod
    def synthetic(cls, eps="1e-4", length: int | None = None, x0="-0.05", symmetric: bool = False):
        """The model x -> x + eps + x^2, domains cut by the orbit of x0.

        Without ``length`` the orbit is followed until it passes -x0.  With
        ``symmetric`` the start point is solved so that |J_1| = |J_l|.
        """
        eps, x0 = to_scalar(eps), to_scalar(x0)
        if eps <= 0 or x0 >= 0:
            raise BadInput("need eps > 0 and a start point x0 < 0")

        def phi(x):
            return x + eps + x * x

        def sphi(x):
            return -mpmath.mpf(6) / (1 + 2 * x) ** 2

        if length is None:
            length, x = 0, x0
            while x < -x0:
                x = phi(x)
                length += 1
        if symmetric:
            def gap(start):
                ls = cls.from_orbit(phi, start, length).lengths
                return ls[0] - ls[-1]
            x0 = mpmath.findroot(gap, x0)
        return cls.from_orbit(phi, x0, length, sphi)

    @classmethod
    def from_bridge(cls, fmap: CircleMap, bridge: Bridge, chain: AuxiliaryChain | None = None):
        """phi = f^{q_m} on a bridge of the level-m auxiliary partition, domains ordered by phi.

        Points are lifts near the base point f^i(c_0) of the bridge, and the
        branch subtracts the integer p_m so that it maps nearby lifts to
        nearby lifts.
        """
        if bridge.count < 2:
            raise BadInput("a bridge needs at least two atoms")
        chain = chain or chain_for(fmap)
        part = chain.aux(bridge.level)
        geo = chain.level(bridge.level - 1)
        c = orbits_of(fmap)[0].point(bridge.base_iterate)
        items = []
        for idx in bridge.atoms:
            atom = part.atoms[idx]
            a = c + _signed(atom.left.lift - c)
            b = a + atom.length
            # f^{q_{n+1}} moves the fundamental domains of I_n(c_0) towards c_0
            items.append((-geo.sigma * a, (b, a) if geo.sigma > 0 else (a, b)))
        items.sort(key=lambda it: it[0])
        domains = [d for _, d in items]
        q = geo.q1
        p = map_digits(fmap, bridge.level + 1).p(bridge.level)

        def branch(x):
            return fmap.iterate(x, q) - p

        return cls(branch, domains, lambda x: schwarzian(fmap, x, q))

    def sampled_schwarzian(self, per_domain: int = 1) -> float:
        if self.schwarzian is None:
            raise BadInput("no Schwarzian available for this map")
        worst = -mpmath.inf
        for a, b in self.domains:
            for s in range(per_domain):
                x = a + (b - a) * (s + mpmath.mpf(1) / 2) / per_domain
                try:
                    worst = max(worst, self.schwarzian(x))
                except NearCriticalSample:
                    continue
        return float(worst)


def yoccoz_check(apm: AlmostParabolicMap, triples: int = 200, seed: int = 0) -> dict:
    """y^_nu = |J_nu| min(nu, l+1-nu)^2 / |I| and the ratio-of-runs comparison."""
    ell = apm.length
    total = apm.total
    ls = apm.lengths
    y = [float(ls[nu - 1] * min(nu, ell + 1 - nu) ** 2 / total) for nu in range(1, ell + 1)]
    band = (min(y), max(y))
    C = max(band[1], 1.0 / band[0])
    prefix = [mpmath.mpf(0)]
    for length in ls:
        prefix.append(prefix[-1] + length)
    rng = np.random.default_rng(seed)
    ratios = []
    if ell >= 3:
        for _ in range(triples):
            k, l, m = sorted(rng.choice(np.arange(1, ell + 1), size=3, replace=False).tolist())
            measured = (prefix[m] - prefix[l]) / (prefix[l] - prefix[k])
            model = mpmath.mpf(k * (m - l)) / (m * (l - k))
            ratios.append(float(measured / model))
    runs = {"triples": len(ratios)}
    if ratios:
        runs.update(min=min(ratios), max=max(ratios))
    return {"length": ell, "width": apm.width, "y_hat": y, "band": list(band), "C": C, "ratio_of_runs": runs}


def _sup_distance(phi: AlmostParabolicMap, psi: AlmostParabolicMap, samples: int) -> mpmath.mpf:
    lo = max(phi.hull[0], psi.hull[0])
    hi = min(phi.hull[1], psi.hull[1])
    worst = mpmath.mpf(0)
    for s in range(samples + 1):
        x = lo + (hi - lo) * s / samples
        worst = max(worst, abs(phi.branch(x) - psi.branch(x)))
    return worst


def shadowing_check(phi: AlmostParabolicMap, psi: AlmostParabolicMap, k_range=None, x=None,
                    samples: int = 1000) -> dict:
    """|phi^k(x) - psi^k(x)| / (k^3 |phi - psi|_0) for k <= l/2."""
    if phi.length != psi.length:
        raise DomainMismatch("the two maps have different lengths")
    lo, hi = max(phi.hull[0], psi.hull[0]), min(phi.hull[1], psi.hull[1])
    if hi <= lo:
        raise DomainMismatch("the domains of the two maps are disjoint")
    if x is None:
        a = [min(phi.domains[0]), max(phi.domains[0])]
        b = [min(psi.domains[0]), max(psi.domains[0])]
        left, right = max(a[0], b[0]), min(a[1], b[1])
        if right < left:
            raise DomainMismatch("the first fundamental domains do not intersect")
        x = (left + right) / 2
    x = to_scalar(x)
    if not (phi.contains_first(x) and psi.contains_first(x)):
        raise DomainMismatch("the start point is not in both first fundamental domains")
    ks = list(k_range) if k_range is not None else list(range(1, phi.length // 2 + 1))
    if max(ks) > phi.length // 2:
        raise BadInput("k must not exceed l/2")
    norm = _sup_distance(phi, psi, samples)
    rows = []
    u = v = x
    k_done = 0
    for k in sorted(ks):
        while k_done < k:
            u, v = phi.branch(u), psi.branch(v)
            k_done += 1
        dev = abs(u - v)
        ratio = mpmath.mpf(0) if dev == 0 else dev / (k ** 3 * norm)
        rows.append({"k": k, "deviation": float(dev), "ratio": float(ratio)})
    return {"norm": float(norm), "rows": rows, "C": max(r["ratio"] for r in rows)}


# ---------------------------------------------------------------------------
# Hoelder exponent
# ---------------------------------------------------------------------------

def _fit_line(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = intercept + slope * x
    dof = len(x) - 2
    if dof > 0:
        s2 = float(np.sum((y - pred) ** 2)) / dof
        se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        se = float("nan")
    return float(slope), float(intercept), se


def holder_estimate(setup: ConjugacyOnOrbits, n_range=None, cap: float = ALPHA_CAP) -> tuple:
    """Exponent of the slope functions of the piecewise-affine interpolants of h on Q_n.

    On Q_n the interpolant has slope |h(I)|/|I| on the atom I.  The largest
    jump of log-slope between adjacent atoms, omega_n, is regressed on the
    largest atom size against log; its slope estimates alpha (capped).
    """
    levels = _levels(n_range)
    rows = []
    for n in levels:
        grid = setup.chain.grid(n)
        src = _source_lengths(setup, grid.atoms)
        img = _image_lengths(setup, grid.atoms)
        slopes = [mpmath.log(b / a) for a, b in zip(src, img)]
        omega = max(abs(slopes[j] - slopes[(j + 1) % len(slopes)]) for j in range(len(slopes)))
        rows.append({"n": n, "omega": float(omega), "max_size": float(max(src)), "min_size": float(min(src)),
                     "max_slope": float(mpmath.exp(max(slopes))), "min_slope": float(mpmath.exp(min(slopes)))})
    diag = {"rows": rows, "cap": cap}
    ns = [r["n"] for r in rows]
    lam0 = math.exp(_fit_line(ns, np.log([r["min_size"] for r in rows]))[0])
    lam1 = math.exp(_fit_line(ns, np.log([r["max_size"] for r in rows]))[0])
    diag.update(lambda0=lam0, lambda1=lam1)
    pts = [(math.log(r["max_size"]), math.log(r["omega"])) for r in rows[FIT_DROP:] if r["omega"] > 1e-25]
    if len(pts) < 3:
        diag["band"] = [cap, cap]
        diag["smooth"] = True
        return cap, diag
    slope, _, se = _fit_line([p[0] for p in pts], [p[1] for p in pts])
    alpha = min(max(slope, 0.0), cap)
    diag["band"] = [min(max(slope - 2 * se, 0.0), cap), min(max(slope + 2 * se, 0.0), cap)]
    diag["raw_slope"] = slope
    diag["smooth"] = False
    return alpha, diag


# ---------------------------------------------------------------------------
# Full battery
# ---------------------------------------------------------------------------

def rigidity_battery(setup: ConjugacyOnOrbits, n_range=None, critical_index: int = 0) -> dict:
    """All four decay series plus the key estimate and Hoelder diagnostics for one pair."""
    levels = _levels(n_range)
    d0 = renorm_convergence(setup.f, setup.g, critical_index, 0, levels, setup)
    d1 = renorm_convergence(setup.f, setup.g, critical_index, 1, levels, setup)
    ratios = interval_ratio_series(setup.f, setup.g, critical_index, levels, setup)
    crit = criterion_statistics(setup, levels)
    key = key_estimate_series(setup, levels, d1_series=d1)
    alpha, diag = holder_estimate(setup, levels)
    return {"d0": d0, "d1": d1, "interval_ratio": ratios["normalized"],
            "interval_ratio_raw": ratios["raw"], "criterion": crit, "key_estimate": key,
            "cross_check": ratios["cross_check"], "holder": {"alpha": alpha, **diag}}


def manifest(setup: ConjugacyOnOrbits, battery: dict, signature: dict | None = None) -> str:
    series = [{"name": s.name, "C": None if s.fit is None else s.fit[0], "rate": s.rate,
               "quality": s.fit_quality} for s in battery.values() if isinstance(s, DecaySeries)]
    doc = {"maps": [setup.f.to_dict(), setup.g.to_dict()], "pairing": list(setup.pairing),
           "signature": signature, "series": series}
    return json.dumps(doc, sort_keys=True, indent=1)
