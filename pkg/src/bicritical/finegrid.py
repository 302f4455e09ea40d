"""Auxiliary partitions, bridges, intermediate partitions and the fine grid around c_0.

Everything is built on orbit labels: a vertex labelled (i, k) is f^k(c_i).
Combinatorial checks (refinement, vertex inclusion, atom counts) compare
label sets exactly; only the reported constants depend on the geometry.

Orientation conventions used throughout the builder, for a level n with
a = a_{n+1}: inside I_n(c_0) the return f^{q_{n+1}} moves points towards
c_0, the fundamental domains Delta_j = f^{(j-1) q_{n+1} + q_n}(I_{n+1}(c_0))
are stacked with Delta_1 at the far end and Delta_a next to I_{n+2}(c_0),
and the signed coordinate s(x) = sigma (x - c_0) is positive on I_n(c_0).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import (AddressMissing, BadInput, ConsistencyFailure, DegenerateOrbit, NotFound,
                     TooShort, WrongCriticalCount)
from .maps import CircleMap, map_digits, orbits_of
from .numerics import CirclePoint, frac, tolerance, to_scalar
from .partitions import Partition, Vertex, standard_partition
from .svg import PALETTE, ring_svg

__all__ = ["GridConfig", "DEFAULT_CONFIG", "FreeCriticalPoint", "TwoBridgesStatus", "AuxiliaryPartition",
           "Bridge", "IntermediatePartition", "BalancedDecomposition", "GridAtom", "FineGrid",
           "VertexAddress", "AuxiliaryChain", "free_critical_point", "free_point_position",
           "in_window", "is_two_bridges", "auxiliary_partition", "bridges", "classify_bridge",
           "intermediate_partition", "balanced_decomposition", "fine_grid", "vertex_address",
           "vertex_addresses", "chain_for", "aux_standard_comparability", "grids_svg",
           "adjacency_csv"]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GridConfig:
    """Named constants of the construction; the defaults are the published choices."""

    two_bridges_min: int = 23
    window_lo: int = 11
    window_hi_offset: int = 10
    saddle_node_threshold: int = 1000
    max_multiplicity: int = 48
    max_children: int = 1000
    geometry_cap: float = 1000.0
    midpoint_rule: bool = True
    midpoint_tolerance: float = 1e-12

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


DEFAULT_CONFIG = GridConfig()


def _require_bicritical(fmap: CircleMap) -> None:
    if len(fmap.critical_points) != 2:
        raise WrongCriticalCount("the fine-grid construction needs exactly two critical points")


def _shift(label: tuple, i: int) -> tuple:
    return (label[0], label[1] + i)


# ---------------------------------------------------------------------------
# Level geometry and the free critical point
# ---------------------------------------------------------------------------

class _Level:
    """Return times and the signed coordinate on I_n(c_0) for one level."""

    def __init__(self, fmap: CircleMap, n: int):
        cf = map_digits(fmap, n + 2)
        self.n = n
        self.q_n, self.q1, self.q2 = cf.q(n), cf.q(n + 1), cf.q(n + 2)
        self.a = cf.digits[n + 1]
        self.orbits = orbits_of(fmap)
        orbit0 = self.orbits[0]
        self.c0 = orbit0.base
        signed = orbit0.point(self.q_n) - self.c0 - cf.p(n)
        signed1 = orbit0.point(self.q1) - self.c0 - cf.p(n + 1)
        signed2 = orbit0.point(self.q2) - self.c0 - cf.p(n + 2)
        self.sigma = 1 if signed > 0 else -1
        self.len_n = abs(signed)
        self.len_next = abs(signed1)
        self.len_next2 = abs(signed2)
        # the J-interval J_{n+1} = I_{n+1} u I_{n+2} in signed offsets from c_0
        self.j_next = (min(signed1, signed2), max(signed1, signed2))
        self.j_here = (min(signed, signed1), max(signed, signed1))

    def s(self, label) -> mpmath.mpf:
        """Signed coordinate sigma (x - c_0), reduced to [0, 1)."""
        return frac(self.sigma * (self.orbits.point(label) - self.c0))

    def offset(self, label) -> mpmath.mpf:
        """Signed offset x - c_0 taken in (-1/2, 1/2]."""
        d = self.orbits.point(label) - self.c0
        return d - mpmath.nint(d)

    def delta(self, j: int) -> tuple:
        """(inner, outer) labels of Delta_j; Delta_1 is adjacent to f^{q_n}(c_0)."""
        return (0, self.q_n + j * self.q1), (0, self.q_n + (j - 1) * self.q1)


@dataclass(frozen=True)
class FreeCriticalPoint:
    """The free critical point: the unique pullback f^{-k}(c_1) in the domain of the return."""

    level: int
    location: CirclePoint
    backward_index: int
    branch: str

    @property
    def label(self) -> tuple:
        return (1, -self.backward_index)


def free_critical_point(fmap: CircleMap, n: int, branch: str | None = None) -> FreeCriticalPoint:
    """Scan f^{-k}(c_1) for the unique hit in I_n(c_0) (long) or I_{n+1}(c_0) (short)."""
    _require_bicritical(fmap)
    if branch not in (None, "long", "short"):
        raise BadInput("branch must be 'long', 'short' or None")
    geo = _Level(fmap, int(n))
    slack = tolerance(10)
    hits = {"long": [], "short": []}
    for k in range(geo.q1):
        label = (1, -k)
        s = geo.s(label)
        if s <= slack or s >= 1 - slack:
            raise DegenerateOrbit(f"f^{-k}(c_1) coincides with c_0: c_1 is on the forward orbit of c_0")
        if s < geo.len_n:
            hits["long"].append(k)
        if k < geo.q_n and 1 - s < geo.len_next:
            hits["short"].append(k)
    total = len(hits["long"]) + len(hits["short"])
    if total > 1:
        raise ConsistencyFailure(f"{total} pullbacks of c_1 in the return domain at level {n}")
    chosen = branch or ("long" if hits["long"] else "short")
    if not hits[chosen]:
        raise NotFound(f"no pullback of c_1 on the {chosen} branch at level {n}")
    k = hits[chosen][0]
    return FreeCriticalPoint(int(n), CirclePoint(geo.orbits.point((1, -k))), k, chosen)


def free_point_position(fmap: CircleMap, n: int) -> dict:
    """Where the free point sits: I_{n+1}, I_{n+2}, or the index j of the Delta_j containing it."""
    fp = free_critical_point(fmap, n)
    geo = _Level(fmap, int(n))
    out = {"level": int(n), "branch": fp.branch, "backward_index": fp.backward_index,
           "a_next": geo.a, "region": None, "j": None}
    if fp.branch == "short":
        out["region"] = "I_n+1"
        return out
    s = geo.s(fp.label)
    if s < geo.s((0, geo.q2)):
        out["region"] = "I_n+2"
        return out
    for j in range(1, geo.a + 1):
        inner, outer = geo.delta(j)
        if geo.s(inner) <= s <= geo.s(outer):
            out["region"], out["j"] = "delta", j
            return out
    raise ConsistencyFailure("free point inside I_n(c_0) but outside every fundamental domain")


def in_window(j: int, a: int, config: GridConfig = DEFAULT_CONFIG) -> bool:
    """Whether Delta_j is in the strict window window_lo <= j <= a - window_hi_offset."""
    return config.window_lo <= j <= a - config.window_hi_offset


@dataclass(frozen=True)
class TwoBridgesStatus:
    level: int
    value: bool
    a_next: int
    region: str | None
    j: int | None
    clauses: dict
    free: FreeCriticalPoint | None = None

    def __bool__(self) -> bool:
        return self.value

    def to_dict(self) -> dict:
        return {"level": self.level, "two_bridges": self.value, "a_next": self.a_next,
                "region": self.region, "j": self.j, "clauses": dict(self.clauses)}


def is_two_bridges(fmap: CircleMap, n: int, config: GridConfig = DEFAULT_CONFIG) -> TwoBridgesStatus:
    """Two-bridges test at level n; diagnostics give the Delta index of the free point."""
    _require_bicritical(fmap)
    n = int(n)
    a = map_digits(fmap, n + 2).digits[n + 1]
    big = a >= config.two_bridges_min
    pos = free_point_position(fmap, n)
    inside = pos["region"] == "delta"
    window = inside and in_window(pos["j"], a, config)
    clauses = {"digit": big, "outside_I_n+2": inside, "window": window}
    return TwoBridgesStatus(n, bool(big and inside and window), a, pos["region"], pos["j"], clauses,
                            free_critical_point(fmap, n))


# ---------------------------------------------------------------------------
# Auxiliary partitions
# ---------------------------------------------------------------------------

class AuxiliaryPartition(Partition):
    """The partition built from the previous level, with construction bookkeeping.

    ``two_bridges`` refers to level - 1, the level whose combinatorics were
    used.  ``special_markers`` lists atom indices of the Delta-hat atoms and of
    Delta_L, Delta_R when they exist.
    """

    def __init__(self, base, vertices, level: int, two_bridges: bool, tags: dict | None = None,
                 info: dict | None = None):
        super().__init__(base, vertices)
        self.level = level
        self.two_bridges = two_bridges
        self.info = dict(info or {})
        tags = tags or {}
        markers = {"delta_hat": [], "delta_L": [], "delta_R": []}
        for j, atom in enumerate(self.atoms):
            tag = tags.get(frozenset(atom.labels))
            if tag is not None:
                atom.kind, atom.iterate = tag
                if atom.kind in markers:
                    markers[atom.kind].append(j)
        self.special_markers = markers
        self.chain = None

    def atoms_between(self, left, right) -> list:
        """Atom indices from vertex ``left`` to vertex ``right`` in circle order."""
        i, j = self.vertex_index(left), self.vertex_index(right)
        count = (j - i) % len(self.atoms)
        return [(i + t) % len(self.atoms) for t in range(count)]

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update({"level": self.level, "two_bridges": self.two_bridges,
                  "special_markers": self.special_markers, "schema_version": SCHEMA_VERSION,
                  "info": {k: v for k, v in self.info.items() if k != "replacements"},
                  "replacements": [[list(v), None if w is None else list(w), how]
                                   for v, w, how in self.info.get("replacements", [])]})
        return d


@dataclass
class Bridge:
    """A run of adjacent auxiliary atoms f^i(G) with G a bridge inside I_n(c_0)."""

    level: int
    name: str
    base_iterate: int
    left: tuple
    right: tuple
    atoms: list
    kind: str
    lengths: list = field(default_factory=list, repr=False)

    @property
    def count(self) -> int:
        return len(self.atoms)

    @property
    def length(self):
        return mpmath.fsum(self.lengths) if self.lengths else None


def classify_bridge(count: int, config: GridConfig = DEFAULT_CONFIG) -> str:
    """'saddle_node' from the threshold on, otherwise 'regular'."""
    if count < 2:
        raise BadInput("a bridge has at least two atoms")
    return "saddle_node" if count >= config.saddle_node_threshold else "regular"


class IntermediatePartition(Partition):
    """Regular intervals and bridges of an auxiliary partition, as atoms."""

    def __init__(self, aux: AuxiliaryPartition, bridge_list: Sequence[Bridge]):
        interior = set()
        by_left = {}
        for b in bridge_list:
            by_left[b.left] = b
            for idx in b.atoms[1:]:
                interior.add(aux.atoms[idx].left.label)
        super().__init__(aux.base, [v for v in aux.vertices if v.label not in interior])
        self.level = aux.level
        self.aux = aux
        self.bridges = list(bridge_list)
        self.members = []
        self.bridge_of = {}
        for j, atom in enumerate(self.atoms):
            b = by_left.get(atom.left.label)
            if b is not None and b.right == atom.right.label:
                self.members.append(list(b.atoms))
                atom.kind = "saddle_node" if b.kind == "saddle_node" else "regular_bridge"
                self.bridge_of[j] = b
            else:
                members = aux.atoms_between(atom.left.label, atom.right.label)
                if len(members) != 1:
                    raise ConsistencyFailure("a regular interval of the intermediate partition "
                                             "spans several auxiliary atoms")
                self.members.append(members)
                atom.kind = "regular"

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update({"level": self.level, "schema_version": SCHEMA_VERSION,
                  "members": [len(m) for m in self.members]})
        return d


class AuxiliaryChain:
    """Lazily built sequence of auxiliary and intermediate partitions of one map."""

    def __init__(self, fmap: CircleMap, config: GridConfig = DEFAULT_CONFIG):
        _require_bicritical(fmap)
        self.fmap = fmap
        self.config = config
        self.orbits = orbits_of(fmap)
        self._levels = {}
        self._status = {}
        self._aux = {}
        self._bridges = {}
        self._inter = {}
        self._balanced = {}
        self._grids = {}

    # -- basics ----------------------------------------------------------------
    def level(self, n: int) -> _Level:
        if n not in self._levels:
            self._levels[n] = _Level(self.fmap, n)
        return self._levels[n]

    def status(self, n: int) -> TwoBridgesStatus:
        if n not in self._status:
            self._status[n] = is_two_bridges(self.fmap, n, self.config)
        return self._status[n]

    def vertex(self, label) -> Vertex:
        return Vertex(label, self.orbits.point(label))

    # -- auxiliary partitions ----------------------------------------------------
    def aux(self, n: int) -> AuxiliaryPartition:
        n = int(n)
        if n < 0:
            raise BadInput("levels start at 0")
        for m in range(n + 1):
            if m not in self._aux:
                self._aux[m] = self._build_zero() if m == 0 else self._build_next(m - 1)
                self._aux[m].chain = self
                self._check_properties(m)
        return self._aux[n]

    def _build_zero(self) -> AuxiliaryPartition:
        std = standard_partition(self.fmap, 0, 0)
        tags = {frozenset(a.labels): (a.kind, a.iterate) for a in std.atoms}
        return AuxiliaryPartition(std.base, std.vertices, 0, False, tags, {"construction": "standard"})

    def _two_bridges_layout(self, n: int, geo: _Level, st: TwoBridgesStatus):
        """Atoms of the new partition inside I_n(c_0), from c_0 outwards, plus r, l."""
        q, a = geo.q1, geo.a
        kb = st.free.backward_index
        s = geo.s

        def hat(j):
            return (1, -kb + j * q)

        def d1(j):
            return (0, geo.q_n + j * q)

        def iv(inner, outer):
            return s(inner), s(outer)

        def meets(x, y):
            return max(x[0], y[0]) <= min(x[1], y[1])

        def delta_1(j):
            return iv(d1(j + 1), d1(j))

        def delta_hat(j):
            return iv(hat(j + 1), hat(j))

        def delta_a(j):
            return iv(d1(a - j), d1(a - j - 1))

        r = next((j for j in range(a + 1) if meets(delta_hat(-j), delta_1(j))), None)
        ell = next((j for j in range(a + 1) if meets(delta_a(j), delta_hat(j))), None)
        if r is None or ell is None or r < 1 or ell < 1:
            raise ConsistencyFailure(f"collision indices r = {r}, l = {ell} at level {n}; "
                                     "both must be at least 1")
        gap_r = (s(hat(1 - r)), s(d1(r)))
        gap_l = (s(d1(a - ell)), s(hat(ell)))

        def inside(x, g):
            return g[0] <= x[0] and x[1] <= g[1]

        orient_r = "paper" if inside(delta_1(r), gap_r) or inside(delta_hat(-r), gap_r) else "mirrored"
        orient_l = "paper" if inside(delta_a(ell), gap_l) or inside(delta_hat(ell), gap_l) else "mirrored"

        layout = [(((0, 0), (0, geo.q2)), "I_n+2")]
        n_a = ell if orient_l == "paper" else ell - 1
        layout += [((d1(a - j), d1(a - j - 1)), "delta_a") for j in range(n_a)]
        layout.append(((d1(a - n_a), hat(ell)), "delta_L"))
        layout += [((hat(j + 1), hat(j)), "delta_hat") for j in range(ell - 1, -r, -1)]
        n_1 = r if orient_r == "paper" else r - 1
        layout.append(((hat(1 - r), d1(n_1)), "delta_R"))
        layout += [((d1(j + 1), d1(j)), "delta_1") for j in range(n_1 - 1, -1, -1)]
        # the layout must be a strictly increasing chain in s from c_0 to f^{q_n}(c_0)
        prev = mpmath.mpf(0)
        for (inner, outer), tag in layout:
            lo, hi = s(inner), s(outer)
            if abs(lo - prev) > tolerance(10) or not hi > lo:
                raise ConsistencyFailure(f"two-bridges layout is not a chain at the {tag} atom")
            prev = hi
        info = {"r": r, "ell": ell, "orientation": {"delta_R": orient_r, "delta_L": orient_l},
                "free_label": list(st.free.label), "free_j": st.j, "a_next": a}
        return layout, info

    def _build_next(self, n: int) -> AuxiliaryPartition:
        """The auxiliary partition at level n + 1."""
        prev = self._aux[n]
        st = self.status(n)
        geo = self.level(n)
        tags = {}
        info = {"construction": "two_bridges" if st else "replacement"}
        if st:
            layout, extra = self._two_bridges_layout(n, geo, st)
            info.update(extra)
            labels = set()
            for (x, y), tag in layout:
                for i in range(geo.q1):
                    u, v = _shift(x, i), _shift(y, i)
                    labels.update((u, v))
                    tags[frozenset((u, v))] = (tag, i)
            for i in range(geo.q_n):
                u, v = (0, i), (0, i + geo.q1)
                labels.update((u, v))
                tags[frozenset((u, v))] = ("I_n+1", i)
            expected = geo.q_n + geo.q1 * len(layout)
            ref = Partition(geo.c0, [self.vertex(l) for l in labels])
            if len(ref) != expected:
                raise ConsistencyFailure(f"two-bridges partition has {len(ref)} atoms, expected {expected}")
            for atom in ref.atoms:
                if frozenset(atom.labels) not in tags:
                    raise ConsistencyFailure(f"unexpected atom {atom.labels} in the two-bridges partition")
            info["atoms_in_I_n"] = len(layout)
            protected = {st.free.label}
        else:
            ref = standard_partition(self.fmap, 0, n + 1)
            labels = set(ref.labels)
            for atom in ref.atoms:
                tags[frozenset(atom.labels)] = (atom.kind, atom.iterate)
            protected = set()
        protected |= set(prev.labels) | {(0, 0), (0, geo.q1), (0, geo.q2)}
        info["replacements"] = self._replace(prev, ref, labels, protected)
        part = AuxiliaryPartition(geo.c0, [self.vertex(l) for l in labels], n + 1, bool(st), tags, info)
        return part

    def _replace(self, prev: AuxiliaryPartition, ref: Partition, labels: set, protected: set) -> list:
        """Insert missing vertices of the previous level, removing the closest reference vertex."""
        done = []
        missing = [v for v in prev.vertices if v.label not in labels]
        for v in missing:
            j = ref.locate(v.lift)
            atom = ref.atoms[j]
            rel = frac(v.lift - ref.base) - atom.start
            d_left, d_right = rel, atom.length - rel
            labels.add(v.label)
            if self.config.midpoint_rule and abs(d_left - d_right) <= self.config.midpoint_tolerance * atom.length:
                done.append((v.label, None, "midpoint"))
                continue
            if d_left < d_right:
                w = atom.left
            elif d_right < d_left:
                w = atom.right
            else:
                w = min(atom.left, atom.right, key=lambda x: x.position)
            if w.label in protected or w.label not in labels:
                done.append((v.label, w.label, "kept"))
                continue
            labels.discard(w.label)
            done.append((v.label, w.label, "replaced"))
        return done

    def _adjacent(self, part: Partition, x, y) -> bool:
        m = len(part.vertices)
        i, j = part.vertex_index(x), part.vertex_index(y)
        return (j - i) % m in (1, m - 1)

    def _check_properties(self, m: int) -> None:
        part = self._aux[m]
        geo = self.level(m)
        labels = set(part.labels)
        report = {}
        # (2) I_m(c_0) and I_{m+1}(c_0) are atoms
        for name, k in (("I_m", geo.q_n), ("I_m+1", geo.q1)):
            if not (part.has_label((0, 0)) and part.has_label((0, k)) and self._adjacent(part, (0, 0), (0, k))):
                raise ConsistencyFailure(f"{name}(c_0) is not an atom of the level-{m} auxiliary partition")
        if m > 0:
            prev = self._aux[m - 1]
            # (3) refinement, and atoms kept unchanged must split at the following level
            if not set(prev.labels) <= labels:
                raise ConsistencyFailure(f"level {m} does not refine level {m - 1}")
            if m > 1:
                older = self._aux[m - 2]
                kept = [a for a in older.atoms if self._adjacent(prev, *a.labels)]
                for atom in kept:
                    if self._adjacent(part, *atom.labels):
                        raise ConsistencyFailure(f"atom {atom.labels} survives three levels unsplit")
            # (4) the free point of a two-bridges level is a vertex
            st = self.status(m - 1)
            if st and st.free.label not in labels:
                raise ConsistencyFailure(f"free point of level {m - 1} is not a vertex")
        ratio = part.max_adjacent_ratio()
        report["geometry_constant"] = ratio
        if ratio > self.config.geometry_cap:
            raise ConsistencyFailure(f"adjacent ratio {ratio:.3g} exceeds the cap at level {m}")
        part.info["checks"] = report

    # -- bridges and intermediate partitions ----------------------------------------
    def bridges(self, m: int) -> list:
        """Bridges of the auxiliary partition at level m (defined from level m - 1)."""
        if m in self._bridges:
            return self._bridges[m]
        if m < 1:
            self._bridges[m] = []
            return []
        n = m - 1
        part = self.aux(m)
        geo = self.level(n)
        st = self.status(n)
        base = []
        if st:
            base = self._two_bridges_runs(part, geo, st)
        elif geo.a >= self.config.two_bridges_min:
            lo = self.config.window_lo + 1
            hi = geo.a - self.config.window_hi_offset - 1
            inner, _ = geo.delta(hi)
            _, outer = geo.delta(lo)
            base = [("G1",) + self._ordered(part, inner, outer)]
        out = []
        for name, left, right in base:
            count = len(part.atoms_between(left, right))
            if count < 2:
                continue
            for i in range(geo.q1):
                l_i, r_i = _shift(left, i), _shift(right, i)
                idx = part.atoms_between(l_i, r_i)
                if len(idx) != count:
                    raise ConsistencyFailure(f"image f^{i} of bridge {name} has {len(idx)} atoms, "
                                             f"expected {count}")
                out.append(Bridge(m, name, i, l_i, r_i, idx, classify_bridge(len(idx), self.config),
                                  [part.atoms[t].length for t in idx]))
        self._bridges[m] = out
        return out

    def _ordered(self, part, x, y) -> tuple:
        """(left, right) of two labels bounding an arc inside I_n(c_0)."""
        i, j = part.vertex_index(x), part.vertex_index(y)
        # inside I_n(c_0) no arc wraps past c_0, so the smaller offset is the left end
        return (x, y) if part.offsets[i] < part.offsets[j] else (y, x)

    def _two_bridges_runs(self, part, geo, st) -> list:
        """Maximal runs of non-regular atoms inside I_n(c_0) at a two-bridges level."""
        kb = st.free.backward_index
        q = geo.q1
        hat0 = frozenset(((1, -kb + q), (1, -kb)))
        hat_m1 = frozenset(((1, -kb), (1, -kb - q)))
        outer = frozenset(((0, geo.q_n + q), (0, geo.q_n)))
        inner = frozenset(((0, 0), (0, geo.q2)))
        regular = {hat0, hat_m1, outer, inner}
        # walk I_n(c_0) from c_0 outwards by signed coordinate
        chain = []
        label = (0, 0)
        target = (0, geo.q_n)
        idx = part.vertex_index(label)
        step = 1 if geo.sigma > 0 else -1
        while label != target:
            nxt = part.vertices[(idx + step) % len(part.vertices)].label
            chain.append((label, nxt))
            idx = (idx + step) % len(part.vertices)
            label = nxt
            if len(chain) > len(part.vertices):
                raise ConsistencyFailure("walk along I_n(c_0) did not terminate")
        runs, current = [], []
        for pair in chain + [None]:
            if pair is None or frozenset(pair) in regular:
                if current:
                    runs.append(current)
                current = []
            else:
                current.append(pair)
        names = ["G2", "G1"]
        out = []
        for t, run in enumerate(runs):
            name = names[t] if t < 2 else f"G{t + 1}"
            out.append((name,) + self._ordered(part, run[0][0], run[-1][1]))
        return out

    def intermediate(self, m: int) -> IntermediatePartition:
        if m not in self._inter:
            part = self.aux(m)
            inter = IntermediatePartition(part, self.bridges(m))
            if m > 0:
                prev = self.aux(m - 1)
                if not set(prev.labels) <= set(inter.labels):
                    raise ConsistencyFailure(f"intermediate partition {m} does not refine auxiliary {m - 1}")
                if not set(inter.labels) <= set(part.labels):
                    raise ConsistencyFailure(f"intermediate partition {m} is not coarser than auxiliary {m}")
                counts = [len(_between(inter, *a.labels)) for a in prev.atoms]
                inter.multiplicity = max(counts)
                if inter.multiplicity > self.config.max_multiplicity:
                    raise ConsistencyFailure(f"an auxiliary atom holds {inter.multiplicity} intermediate "
                                             f"atoms at level {m}")
                ratios = []
                for a in prev.atoms:
                    for t in _between(inter, *a.labels):
                        x = inter.atoms[t].length / a.length
                        ratios.append(float(max(x, 1 / x)))
                inter.parent_comparability = max(ratios)
            else:
                inter.multiplicity = 1
                inter.parent_comparability = 1.0
            self._inter[m] = inter
        return self._inter[m]

    def balanced(self, m: int, j: int) -> "BalancedDecomposition":
        key = (m, j)
        if key not in self._balanced:
            inter = self.intermediate(m)
            self._balanced[key] = balanced_decomposition(inter.bridge_of[j])
        return self._balanced[key]

    # -- fine grid ----------------------------------------------------------------
    def grid(self, n: int) -> "FineGrid":
        n = int(n)
        if n < 1:
            raise BadInput("the fine grid starts at level 1")
        for k in range(1, n + 1):
            if k not in self._grids:
                cells = self._q1_cells() if k == 1 else self._refine(self._grids[k - 1])
                self._grids[k] = FineGrid(self, k, cells, self._grids.get(k - 1))
        return self._grids[n]

    def _cell_labels(self, m, j, lo, hi):
        inter = self.intermediate(m)
        members = inter.members[j]
        aux = self.aux(m)
        return aux.atoms[members[lo]].left.label, aux.atoms[members[hi - 1]].right.label

    def _range_cell(self, m, j, lo, hi, many_type="b4"):
        left, right = self._cell_labels(m, j, lo, hi)
        if hi - lo == 1:
            return _Cell("aux", m, "b1", left, right)
        return _Cell("run", m, many_type, left, right, (j, lo, hi))

    def _saddle_cells(self, m, j):
        bd = self.balanced(m, j)
        (l0, r0) = bd.laterals[0]
        lo, hi = bd.central[1]
        left, right = self._cell_labels(m, j, lo, hi)
        return [self._range_cell(m, j, *l0), _Cell("central", m, "b3", left, right, (j, 1)),
                self._range_cell(m, j, *r0)]

    def _inter_cells(self, m):
        inter = self.intermediate(m)
        cells = []
        for j, atom in enumerate(inter.atoms):
            if atom.kind == "saddle_node":
                cells.extend(self._saddle_cells(m, j))
            else:
                cells.append(_Cell("inter", m, "b2", atom.left.label, atom.right.label, (j,)))
        return cells

    def _q1_cells(self):
        return self._inter_cells(1)

    def _split_aux(self, m, left, right):
        """Case (1): an auxiliary atom of level m becomes its intermediate atoms of level m + 1."""
        inter = self.intermediate(m + 1)
        if not (inter.has_label(left) and inter.has_label(right)):
            raise ConsistencyFailure(f"auxiliary atom {left}-{right} is not a union of level-{m + 1} "
                                     "intermediate atoms")
        return [_Cell("inter", m + 1, "b2", inter.atoms[t].left.label, inter.atoms[t].right.label, (t,))
                for t in _between(inter, left, right)]

    def _children(self, cell: "_Cell") -> list:
        m = cell.m
        if cell.role == "aux":
            return self._split_aux(m, cell.left, cell.right)
        if cell.role == "inter":
            (j,) = cell.data
            inter = self.intermediate(m)
            kind = inter.atoms[j].kind
            if kind == "saddle_node":
                return self._saddle_cells(m, j)
            if kind == "regular":
                return self._split_aux(m, cell.left, cell.right)
            aux = self.aux(m)
            return [_Cell("aux", m, "b1", aux.atoms[t].left.label, aux.atoms[t].right.label)
                    for t in inter.members[j]]
        if cell.role == "central":
            j, i = cell.data
            bd = self.balanced(m, j)
            if i == bd.d + 1:
                lo, hi = bd.central[i]
                if hi - lo == 1:
                    return self._split_aux(m, cell.left, cell.right)
                return self._halve(m, j, lo, hi)
            (li, ri) = bd.laterals[i]
            lo, hi = bd.central[i + 1]
            left, right = self._cell_labels(m, j, lo, hi)
            return [self._range_cell(m, j, *li), _Cell("central", m, "b3", left, right, (j, i + 1)),
                    self._range_cell(m, j, *ri)]
        if cell.role == "run":
            j, lo, hi = cell.data
            return self._halve(m, j, lo, hi)
        raise ConsistencyFailure(f"unknown grid cell role {cell.role}")

    def _halve(self, m, j, lo, hi):
        """Case (4): p = 2q + r atoms split into the first q and the remaining p - q."""
        p = hi - lo
        q = p // 2
        return [self._range_cell(m, j, lo, lo + q), self._range_cell(m, j, lo + q, hi)]

    def _refine(self, grid: "FineGrid") -> list:
        cells = []
        grid.children = []
        for cell in grid.cells:
            kids = self._children(cell)
            if kids[0].left != cell.left or kids[-1].right != cell.right:
                raise ConsistencyFailure(f"children of {cell.left}-{cell.right} do not reproduce it")
            grid.children.append(len(kids))
            cells.extend(kids)
        return cells


def _between(part: Partition, left, right) -> list:
    i, j = part.vertex_index(left), part.vertex_index(right)
    count = (j - i) % len(part.atoms)
    return [(i + t) % len(part.atoms) for t in range(count)]


_CHAINS = "_aux_chains"


def chain_for(fmap: CircleMap, config: GridConfig | None = None) -> AuxiliaryChain:
    """The shared :class:`AuxiliaryChain` of a map for a given configuration."""
    config = config or DEFAULT_CONFIG
    chains = getattr(fmap, _CHAINS, None)
    if chains is None:
        chains = {}
        setattr(fmap, _CHAINS, chains)
    if config not in chains:
        chains[config] = AuxiliaryChain(fmap, config)
    return chains[config]


def auxiliary_partition(fmap: CircleMap, n: int, config: GridConfig | None = None) -> AuxiliaryPartition:
    return chain_for(fmap, config).aux(n)


def bridges(aux: AuxiliaryPartition) -> list:
    if aux.chain is None:
        raise BadInput("the partition was not produced by an AuxiliaryChain")
    return aux.chain.bridges(aux.level)


def intermediate_partition(aux: AuxiliaryPartition, bridge_list: Sequence[Bridge] | None = None):
    if bridge_list is None:
        if aux.chain is None:
            raise BadInput("the partition was not produced by an AuxiliaryChain")
        return aux.chain.intermediate(aux.level)
    return IntermediatePartition(aux, bridge_list)


def aux_standard_comparability(fmap: CircleMap, n: int, config: GridConfig | None = None) -> float:
    """max |A|/|B| over intersecting atoms A of the auxiliary and B of the standard partition."""
    aux = auxiliary_partition(fmap, n, config)
    std = standard_partition(fmap, 0, n)
    worst = 1.0
    i = j = 0
    slack = tolerance(10)
    while i < len(aux.atoms) and j < len(std.atoms):
        a, b = aux.atoms[i], std.atoms[j]
        lo = max(a.start, b.start)
        hi = min(a.start + a.length, b.start + b.length)
        if hi - lo > slack:
            x = a.length / b.length
            worst = max(worst, float(max(x, 1 / x)))
        if a.start + a.length <= b.start + b.length:
            i += 1
        else:
            j += 1
    return worst


# ---------------------------------------------------------------------------
# Balanced decomposition
# ---------------------------------------------------------------------------

@dataclass
class BalancedDecomposition:
    """Dyadic laterals L_i, R_i and nested centrals M_0 ... M_{d+1}, as [lo, hi) atom ranges."""

    count: int
    d: int
    laterals: list
    central: list
    comparability: dict = field(default_factory=dict)

    def sizes(self) -> dict:
        return {"L": [hi - lo for lo, hi in (l for l, _ in self.laterals)],
                "R": [hi - lo for lo, hi in (r for _, r in self.laterals)],
                "M": [hi - lo for lo, hi in self.central]}

    def reproduces(self) -> bool:
        """The laterals and the final central tile range(count) exactly."""
        pieces = [l for l, _ in self.laterals] + [r for _, r in self.laterals] + [self.central[-1]]
        covered = sorted(pieces)
        pos = 0
        for lo, hi in covered:
            if lo != pos or hi <= lo:
                return False
            pos = hi
        return pos == self.count


def balanced_decomposition(bridge, lengths: Sequence | None = None, min_length: int = 8) -> BalancedDecomposition:
    """Decompose a bridge (or an atom count) of length l >= 8 symmetrically from both ends."""
    if isinstance(bridge, Bridge):
        count = bridge.count
        lengths = lengths if lengths is not None else bridge.lengths
    else:
        count = int(bridge)
    if count < min_length:
        raise TooShort(f"balanced decomposition needs at least {min_length} atoms, got {count}")
    d = 0
    while 2 ** (d + 3) <= count:
        d += 1
    laterals, central = [], [(0, count)]
    for i in range(d + 1):
        lo, hi = 2 ** i - 1, 2 ** (i + 1) - 1
        laterals.append(((lo, hi), (count - hi, count - lo)))
        central.append((hi, count - hi))
    bd = BalancedDecomposition(count, d, laterals, central)
    if lengths:
        lengths = [float(x) for x in lengths]

        def size(rng):
            return math.fsum(lengths[rng[0]:rng[1]])

        ratios = []
        for i, (l, r) in enumerate(laterals):
            mid = size(central[i + 1])
            ratios.extend([size(l) / mid, mid / size(l), size(r) / mid, mid / size(r)])
        bd.comparability = {"max_ratio": max(ratios), "union_length": math.fsum(lengths)}
    return bd


# ---------------------------------------------------------------------------
# Fine grid
# ---------------------------------------------------------------------------

@dataclass
class _Cell:
    role: str
    m: int
    type: str
    left: tuple
    right: tuple
    data: tuple = ()


@dataclass
class GridAtom:
    left: Vertex
    right: Vertex
    start: mpmath.mpf
    length: mpmath.mpf
    type: str
    source_level: int

    @property
    def vertex_labels(self) -> tuple:
        return self.left.label, self.right.label


class FineGrid(Partition):
    """Level n of the fine grid, with its axiom report."""

    def __init__(self, chain: AuxiliaryChain, level: int, cells: list, previous: "FineGrid | None"):
        super().__init__(chain.level(0).c0, [chain.vertex(c.left) for c in cells])
        self.level = level
        self.cells = cells
        self.chain = chain
        self.children = None
        if len(self.atoms) != len(cells):
            raise ConsistencyFailure("fine-grid cells overlap")
        start = self.vertex_index(cells[0].left)
        self.grid_atoms = []
        ordered = cells[len(cells) - start:] + cells[:len(cells) - start] if start else cells
        for atom, cell in zip(self.atoms, ordered):
            if atom.labels != (cell.left, cell.right):
                raise ConsistencyFailure("fine-grid cells are not in circle order")
            atom.kind = cell.type
            self.grid_atoms.append(GridAtom(atom.left, atom.right, atom.start, atom.length, cell.type, cell.m))
        self.report = self._axioms(previous)

    def _axioms(self, previous) -> dict:
        aux = self.chain.aux(self.level)
        report = {"level": self.level, "atoms": len(self.atoms),
                  "adjacent_ratio": self.max_adjacent_ratio(),
                  "vertices_in_auxiliary": set(self.labels) <= set(aux.labels),
                  "source_levels": [min(c.m for c in self.cells), max(c.m for c in self.cells)],
                  "types": {t: sum(c.type == t for c in self.cells) for t in ("b1", "b2", "b3", "b4")}}
        if not report["vertices_in_auxiliary"]:
            raise ConsistencyFailure(f"a vertex of Q_{self.level} is not an auxiliary vertex")
        if previous is not None:
            refined = set(previous.labels) <= set(self.labels) and len(self) > len(previous)
            report["strict_refinement"] = refined
            report["max_children"] = max(previous.children)
            if not refined:
                raise ConsistencyFailure(f"Q_{self.level} is not a strict refinement of Q_{self.level - 1}")
            if report["max_children"] > self.chain.config.max_children:
                raise ConsistencyFailure(f"an atom of Q_{self.level - 1} has {report['max_children']} children")
        return report

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "level": self.level,
                "atoms": [{"left": float(g.left.position), "length": float(g.length), "type": g.type,
                           "source_level": g.source_level,
                           "vertex_labels": [list(g.left.label), list(g.right.label)]}
                          for g in self.grid_atoms],
                "report": self.report}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def fine_grid(fmap: CircleMap, n: int, config: GridConfig | None = None) -> FineGrid:
    return chain_for(fmap, config).grid(n)


def grids_svg(grids: Sequence[Partition], size: int = 560, title: str = "") -> str:
    """Nested rings, coarsest outside, one ring per grid level."""
    cx = cy = size / 2
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">']
    if title:
        parts.append(f"<title>{title}</title>")
    count = max(len(grids), 1)
    outer, inner = size * 0.47, size * 0.12
    width = (outer - inner) / count
    for level, grid in enumerate(grids):
        r_out = outer - level * width
        r_in = r_out - 0.85 * width
        for atom in grid.atoms:
            parts.append(_annulus_path(cx, cy, r_out, r_in, float(atom.left.position), float(atom.length),
                                       PALETTE.get(atom.kind, PALETTE[None])))
    parts.append("</svg>")
    return "\n".join(parts)


def _annulus_path(cx, cy, r_out, r_in, left, length, colour):
    def pt(r, turn):
        ang = 2 * math.pi * turn - math.pi / 2
        return cx + r * math.cos(ang), cy + r * math.sin(ang)

    large = 1 if length > 0.5 else 0
    x0, y0 = pt(r_out, left)
    x1, y1 = pt(r_out, left + length)
    x2, y2 = pt(r_in, left + length)
    x3, y3 = pt(r_in, left)
    return (f'<path d="M {x0:.3f} {y0:.3f} A {r_out:.3f} {r_out:.3f} 0 {large} 1 {x1:.3f} {y1:.3f} '
            f'L {x2:.3f} {y2:.3f} A {r_in:.3f} {r_in:.3f} 0 {large} 0 {x3:.3f} {y3:.3f} Z" '
            f'fill="{colour}" stroke="white" stroke-width="0.2"/>')


def adjacency_csv(grids: Iterable[Partition]) -> str:
    """CSV rows (level, index, ratio) of adjacent-atom ratios."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["level", "index", "ratio"])
    for grid in grids:
        for j, r in enumerate(grid.adjacent_ratios()):
            writer.writerow([grid.level, j, repr(float(r))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Vertex addresses
# ---------------------------------------------------------------------------

INITIAL_KINDS = ("c0", "return_c0", "free")


@dataclass(frozen=True)
class VertexAddress:
    """v = phi_1 o ... o phi_L(x) with phi_j = f^{k_j q_{m_j + 1} + sigma_j q_{m_j}}.

    ``initial`` is (kind, m) with kind 'c0' for c_0, 'return_c0' for
    f^{q_{m+2}}(c_0) and 'free' for the free point at level m.
    """

    label: tuple
    word: tuple
    initial: tuple
    bounds: tuple

    def exponent(self, fmap: CircleMap) -> list:
        cf = map_digits(fmap, max([m for _, _, m in self.word] + [self.initial[1]]) + 3)
        return [k * cf.q(m + 1) + s * cf.q(m) for k, s, m in self.word]

    def initial_point(self, fmap: CircleMap) -> mpmath.mpf:
        kind, m = self.initial
        orbits = orbits_of(fmap)
        if kind == "c0":
            return orbits[0].base
        if kind == "return_c0":
            cf = map_digits(fmap, m + 3)
            return fmap.iterate(orbits[0].base, cf.q(m + 2))
        fp = free_critical_point(fmap, m)
        return fmap.iterate(orbits[1].base, -fp.backward_index)

    def replay(self, fmap: CircleMap) -> mpmath.mpf:
        """Apply phi_L first and phi_1 last, iterating the map step by step."""
        x = self.initial_point(fmap)
        for e in reversed(self.exponent(fmap)):
            x = fmap.iterate(x, e)
        return x

    def bounds_respected(self) -> bool:
        return all(abs(k) <= b for (k, _, _), b in zip(self.word, self.bounds))

    def to_dict(self) -> dict:
        return {"label": list(self.label), "word": [list(w) for w in self.word],
                "initial": list(self.initial), "bounds": list(self.bounds)}


def _in_signed(geo: _Level, t, interval, slack) -> bool:
    return interval[0] - slack <= t <= interval[1] + slack


def vertex_addresses(fmap: CircleMap, v, n: int, p: int, config: GridConfig | None = None,
                     limit: int = 2) -> list:
    """Up to ``limit`` distinct addresses of a vertex of level n + p inside J_n(c_0)."""
    chain = chain_for(fmap, config)
    label = v.label if isinstance(v, Vertex) else tuple(v)
    top = n + p
    aux = chain.aux(top)
    if not aux.has_label(label):
        raise AddressMissing(f"{label} is not a vertex of the level-{top} auxiliary partition")
    slack = tolerance(10)
    geo_n = chain.level(n)
    if not _in_signed(geo_n, geo_n.offset(label), geo_n.j_here, slack):
        raise AddressMissing(f"{label} does not lie in J_{n}(c_0)")

    def initial_of(lab, m):
        for mm in range(m, top + 1):
            if lab == (0, 0):
                return ("c0", mm)
            if lab == (0, chain.level(mm).q2):
                return ("return_c0", mm)
            st = chain.status(mm)
            if st and lab == st.free.label:
                return ("free", mm)
        return None

    def bound(m):
        st = chain.status(m)
        if st:
            layout_info = chain.aux(m + 1).info
            return max(layout_info["r"], layout_info["ell"])
        return -(-chain.level(m).a // 2)

    found = []

    def search(lab, m, word, bounds):
        if len(found) >= limit:
            return
        init = initial_of(lab, m)
        if init is not None:
            found.append(VertexAddress(label, tuple(word), init, tuple(bounds)))
            return
        if m > top:
            return
        geo = chain.level(m)
        if _in_signed(geo, geo.offset(lab), geo.j_next, slack):
            search(lab, m + 1, word, bounds)
            return
        st = chain.status(m)
        K = bound(m)
        options = []
        for k in sorted(range(-K, K + 1), key=abs):
            for s in (0, 1):
                if k == 0 and s == 0:
                    continue
                e = k * geo.q1 + s * geo.q_n
                nxt = (lab[0], lab[1] - e)
                t = geo.offset(nxt)
                lands = _in_signed(geo, t, geo.j_next, slack)
                if st and not lands:
                    free = st.free.label
                    hat = (geo.s(_shift(free, geo.q1)), geo.s(free))
                    lands = hat[0] - slack <= geo.s(nxt) <= hat[1] + slack
                if lands or initial_of(nxt, m) is not None:
                    options.append((initial_of(nxt, m) is None, abs(k), s, k, nxt))
        for _, _, s, k, nxt in sorted(options):
            search(nxt, m + 1, word + [(k, s, m)], bounds + [K])
            if len(found) >= limit:
                return

    search(label, n, [], [])
    if not found:
        raise AddressMissing(f"no address found for {label} between levels {n} and {top}")
    return found


def vertex_address(fmap: CircleMap, v, n: int, p: int, config: GridConfig | None = None) -> VertexAddress:
    return vertex_addresses(fmap, v, n, p, config, limit=1)[0]
