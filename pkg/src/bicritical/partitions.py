"""Return intervals, standard dynamical partitions and real-bounds measurements.

Vertices are stored by orbit label, endpoints are re-derived from the orbit
caches, so the combinatorics is exact and only the geometry is approximate.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import BadInput, ConsistencyFailure, PrecisionExhausted
from .maps import CircleMap, map_digits, orbits_of
from .numerics import Arc, CirclePoint, frac, to_scalar, tolerance
from .orbits import CriticalOrbits, OrbitCache
from .svg import ring_svg

__all__ = ["OrbitCache", "CriticalOrbits", "Vertex", "Atom", "Partition", "DynamicalPartition",
           "ReturnInterval", "return_interval", "standard_partition", "real_bounds_report",
           "symmetric_interval_ratio", "refines"]


@dataclass(frozen=True)
class Vertex:
    label: tuple
    lift: mpmath.mpf

    @property
    def position(self) -> mpmath.mpf:
        return frac(self.lift)


@dataclass
class Atom:
    left: Vertex
    right: Vertex
    start: mpmath.mpf
    length: mpmath.mpf
    kind: str | None = None
    iterate: int | None = None

    @property
    def labels(self) -> tuple:
        return self.left.label, self.right.label

    @property
    def arc(self) -> Arc:
        return Arc(CirclePoint(self.left.lift), self.length)

    def contains(self, rel) -> bool:
        """Membership of a point given by its offset from the partition base."""
        return self.start <= rel < self.start + self.length


class Partition:
    """Finite partition of the circle with labelled vertices.

    Vertices are sorted by their offset from ``base``; atom j runs from
    vertex j to vertex j + 1 (cyclically).
    """

    def __init__(self, base, vertices: Iterable[Vertex], min_length=None):
        self.base = to_scalar(base)
        verts = sorted(vertices, key=lambda v: frac(v.lift - self.base))
        if len(verts) < 2:
            raise BadInput("a partition needs at least two vertices")
        self.vertices = verts
        self.offsets = [frac(v.lift - self.base) for v in verts]
        floor = tolerance(10) if min_length is None else min_length
        atoms = []
        m = len(verts)
        for j in range(m):
            start = self.offsets[j]
            stop = self.offsets[j + 1] if j + 1 < m else 1 + self.offsets[0]
            length = stop - start
            if length <= floor:
                raise PrecisionExhausted(f"vertices {verts[j].label} and {verts[(j + 1) % m].label} "
                                         "coincide at working precision")
            atoms.append(Atom(verts[j], verts[(j + 1) % m], start, length))
        self.atoms = atoms
        self._label_index = {v.label: j for j, v in enumerate(verts)}

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def labels(self) -> list:
        return [v.label for v in self.vertices]

    def has_label(self, label) -> bool:
        return label in self._label_index

    def vertex_index(self, label) -> int:
        return self._label_index[label]

    def lengths(self) -> list:
        return [a.length for a in self.atoms]

    def total_length(self) -> mpmath.mpf:
        return mpmath.fsum(self.lengths())

    def locate(self, x) -> int:
        """Index of the atom containing the point x."""
        rel = frac(to_scalar(x) - self.base)
        j = bisect.bisect_right(self.offsets, rel) - 1
        return j % len(self.atoms)

    def adjacent_ratios(self) -> np.ndarray:
        """max(|I|/|J|, |J|/|I|) for each pair of consecutive atoms (cyclic)."""
        lengths = self.lengths()
        out = []
        for j in range(len(lengths)):
            a, b = lengths[j], lengths[(j + 1) % len(lengths)]
            out.append(float(max(a / b, b / a)))
        return np.array(out)

    def max_adjacent_ratio(self) -> float:
        return float(self.adjacent_ratios().max())

    def to_dict(self) -> dict:
        return {
            "marked_point": float(frac(self.base)),
            "atoms": [{"left": float(a.left.position), "length": float(a.length),
                       "generation": a.kind, "iterate": a.iterate,
                       "labels": [list(a.left.label), list(a.right.label)]} for a in self.atoms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_svg(self, title: str = "") -> str:
        return ring_svg(((float(a.left.position), float(a.length), a.kind) for a in self.atoms),
                        title=title)


class DynamicalPartition(Partition):
    """The standard partition P_n(x): long atoms f^i(I_n(x)), short atoms f^j(I_{n+1}(x))."""

    def __init__(self, base, vertices, level: int, q_n: int, q_next: int, critical_index=None,
                 sigma: int | None = None):
        super().__init__(base, vertices)
        self.level = level
        self.q_n = q_n
        self.q_next = q_next
        self.critical_index = critical_index
        for atom in self.atoms:
            k0, k1 = atom.left.label[1], atom.right.label[1]
            diff = k1 - k0
            if sigma is not None:
                # I_n(x) runs from x towards side sigma, I_{n+1}(x) lies on the other side
                is_long, is_short = diff == sigma * q_n, diff == -sigma * q_next
            else:
                is_long, is_short = abs(diff) == q_n, abs(diff) == q_next
            if is_long:
                atom.kind, atom.iterate = "long", min(k0, k1)
            elif is_short:
                atom.kind, atom.iterate = "short", min(k0, k1)
            else:
                raise ConsistencyFailure(f"atom with endpoints f^{k0}, f^{k1} is neither long nor "
                                         f"short at level {level}; the orbit has lost precision")
        n_long = sum(a.kind == "long" for a in self.atoms)
        if n_long != q_next or len(self.atoms) - n_long != q_n:
            raise ConsistencyFailure("atom counts do not match q_n + q_{n+1}")

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["level"] = self.level
        d["q"] = [self.q_n, self.q_next]
        return d


@dataclass(frozen=True)
class ReturnInterval:
    """I_n(x): the arc between x and f^{q_n}(x), on the side where f^{q_n}(x) lies."""

    base: mpmath.mpf
    level: int
    q: int
    signed_length: mpmath.mpf

    @property
    def length(self) -> mpmath.mpf:
        return abs(self.signed_length)

    @property
    def side(self) -> int:
        return 1 if self.signed_length > 0 else -1

    @property
    def arc(self) -> Arc:
        left = self.base if self.side > 0 else self.base + self.signed_length
        return Arc(CirclePoint(left), self.length)

    def contains_offset(self, t) -> bool:
        """Whether base + t lies in the closed interval."""
        t = to_scalar(t)
        return 0 <= t * self.side <= self.length


def _resolve(fmap: CircleMap, x, orbit: OrbitCache | None):
    """(orbit cache, critical index or None) for a marked point given as index or scalar."""
    if orbit is not None:
        return orbit, None
    if isinstance(x, int) and 0 <= x < len(fmap.critical_points):
        return orbits_of(fmap)[x], x
    if isinstance(x, CirclePoint):
        x = x.lift
    return OrbitCache(fmap, to_scalar(x)), None


def return_interval(fmap: CircleMap, x, n: int, orbit: OrbitCache | None = None) -> ReturnInterval:
    """I_n(x); ``x`` is either a critical-point index or a point of the circle."""
    n = int(n)
    cf = map_digits(fmap, n + 1)
    orbit, _ = _resolve(fmap, x, orbit)
    q, p = cf.q(n), cf.p(n)
    return ReturnInterval(orbit.base, n, q, orbit.point(q) - orbit.base - p)


def standard_partition(fmap: CircleMap, x, n: int, orbit: OrbitCache | None = None) -> DynamicalPartition:
    """P_n(x) with vertices f^i(x), 0 <= i < q_n + q_{n+1}."""
    n = int(n)
    cf = map_digits(fmap, n + 1)
    orbit, crit = _resolve(fmap, x, orbit)
    q_n, q_next = cf.q(n), cf.q(n + 1)
    tag = crit if crit is not None else -1
    verts = [Vertex((tag, k), orbit.point(k)) for k in range(q_n + q_next)]
    sigma = 1 if orbit.point(q_n) - orbit.base - cf.p(n) > 0 else -1
    return DynamicalPartition(orbit.base, verts, n, q_n, q_next, crit, sigma)


def refines(fine: Partition, coarse: Partition) -> bool:
    """Every atom of ``fine`` lies inside a single atom of ``coarse``."""
    slack = tolerance(10)
    for atom in fine.atoms:
        start = frac(fine.base + atom.start - coarse.base)
        j = coarse.locate(coarse.base + start + slack)
        parent = coarse.atoms[j]
        off = frac(start - parent.start + slack) - slack
        if off < -slack or off + atom.length > parent.length + slack:
            return False
    return True


def _parents(fine: DynamicalPartition, coarse: DynamicalPartition) -> list:
    slack = tolerance(10)
    return [coarse.locate(coarse.base + atom.start + slack) for atom in fine.atoms]


def real_bounds_report(fmap: CircleMap, c: int = 0, n_range: Sequence[int] = range(4, 13),
                       samples: int = 17) -> dict:
    """Adjacent-atom ratios C_n, child/parent ratios and C^1 bounds on P_n(c)."""
    if not 0 <= c < len(fmap.critical_points):
        raise BadInput("c must index a critical point of the map")
    levels = list(n_range)
    cf = map_digits(fmap, max(levels) + 3)
    orbit = orbits_of(fmap)[c]
    rows = []
    parts = {n: standard_partition(fmap, c, n) for n in levels + [max(levels) + 1]}
    for n in levels:
        part, child = parts[n], parts[n + 1]
        parents = _parents(child, part)
        mu = 0.0
        for atom, j in zip(child.atoms, parents):
            parent = part.atoms[j]
            if atom.labels != parent.labels:
                mu = max(mu, float(atom.length / parent.length))
        c1 = _c1_bounds(fmap, orbit, cf, n, samples)
        rows.append({"n": n, "C_n": part.max_adjacent_ratio(), "mu_n": mu, **c1})
    n0 = None
    for k in range(len(rows)):
        if all(r["mu_n"] < 1 for r in rows[k:]):
            n0 = rows[k]["n"]
            break
    return {"critical_index": c, "rows": rows, "sup_C": max(r["C_n"] for r in rows),
            "sup_mu": max(r["mu_n"] for r in rows), "n0": n0}


def _c1_bounds(fmap, orbit, cf, n, samples):
    """Sampled sup of Df^{q_{n+1}} on I_n(c) and of Df^{q_n} on I_{n+1}(c)."""
    out = {}
    s = np.linspace(0.0, 1.0, samples)
    for name, level, steps in (("Df_q_next_on_I_n", n, cf.q(n + 1)), ("Df_q_n_on_I_next", n + 1, cf.q(n))):
        ri = return_interval(fmap, 0, level, orbit=orbit)
        pts = orbit.segment(0, steps)
        res = fmap.push(pts, ri.side * s * float(ri.length), order=1)
        out[name] = float(np.max(res[:, 1]))
    return out


def symmetric_interval_ratio(fmap: CircleMap, x, n: int, orbit: OrbitCache | None = None) -> mpmath.mpf:
    """|[f^{-q_n}(x), x]| / |[x, f^{q_n}(x)]|."""
    n = int(n)
    cf = map_digits(fmap, n + 1)
    orbit, _ = _resolve(fmap, x, orbit)
    q, p = cf.q(n), cf.p(n)
    forward = abs(orbit.point(q) - orbit.base - p)
    backward = abs(orbit.base - orbit.point(-q) - p)
    return backward / forward
