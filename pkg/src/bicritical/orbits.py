"""Forward and backward orbits of a point, stored as unreduced lifts."""

from __future__ import annotations

import mpmath

from .errors import DepthExceeded

DEFAULT_DEPTH_CAP = 10**7


class OrbitCache:
    """Lazily extended orbit ``k -> F^k(base)`` for any integer k.

    Lifts are kept unreduced, so ``point(k) - base`` is the total rotation
    of k steps.  Extension is single-threaded; once filled, reads are safe
    from several threads.
    """

    def __init__(self, fmap, base, cap: int = DEFAULT_DEPTH_CAP):
        self.map = fmap
        self.base = mpmath.mpf(base)
        self.forward = [self.base]
        self.backward = [self.base]
        self.cap = int(cap)

    @property
    def max_index(self) -> int:
        return len(self.forward) - 1

    def extend_forward(self, k: int) -> None:
        if k > self.cap:
            raise DepthExceeded(f"orbit index {k} exceeds the depth cap {self.cap}")
        f = self.map.lift
        pts = self.forward
        while len(pts) <= k:
            pts.append(f(pts[-1]))

    def extend_backward(self, k: int) -> None:
        if k > self.cap:
            raise DepthExceeded(f"orbit index -{k} exceeds the depth cap {self.cap}")
        inv = self.map.inverse
        pts = self.backward
        while len(pts) <= k:
            pts.append(inv(pts[-1]))

    def point(self, k: int) -> mpmath.mpf:
        """Lift of F^k(base)."""
        k = int(k)
        if k >= 0:
            if k >= len(self.forward):
                self.extend_forward(k)
            return self.forward[k]
        if -k >= len(self.backward):
            self.extend_backward(-k)
        return self.backward[-k]

    __getitem__ = point

    def position(self, k: int) -> mpmath.mpf:
        """Point F^k(base) reduced to [0, 1)."""
        x = self.point(k)
        return x - mpmath.floor(x)

    def segment(self, start: int, stop: int) -> list:
        """Lifts for indices start..stop-1 (forward only)."""
        if stop - 1 >= len(self.forward):
            self.extend_forward(stop - 1)
        return self.forward[start:stop]


class CriticalOrbits:
    """One :class:`OrbitCache` per critical point of a map, addressed by vertex labels.

    A label (i, k) names the point f^k(c_i).
    """

    def __init__(self, fmap, cap: int = DEFAULT_DEPTH_CAP):
        self.map = fmap
        self.caches = [OrbitCache(fmap, c, cap) for c in fmap.crit_lifts]

    def __getitem__(self, i: int) -> OrbitCache:
        return self.caches[i]

    def point(self, label) -> mpmath.mpf:
        i, k = label
        return self.caches[i].point(k)

    def position(self, label) -> mpmath.mpf:
        i, k = label
        return self.caches[i].position(k)
