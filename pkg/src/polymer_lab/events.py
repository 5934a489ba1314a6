"""Admissibility masks and the single-path event algebra.

Two primitive constraints describe every event the estimators need:

* :class:`Avoids` -- the path misses a lattice segment;
* :class:`PositionIn` -- the path's position at one height lies in a
  closed interval.

Both forbid a set of points, so any conjunction of primitives is a mask
and costs one dynamic-programming pass.  Negations and disjunctions are
resolved by inclusion-exclusion over the primitives they mention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .lattice import Axis, DirectedPath, Segment

INF = math.inf


class Mask:
    """Forbidden points, stored as closed x-intervals per height.

    ``predicate`` optionally adds an arbitrary admissibility test
    ``predicate(x, t) -> bool`` (True means the point may be visited).
    Masks are immutable; :meth:`union` returns a new mask.
    """

    def __init__(self, intervals: Mapping[int, Iterable[tuple[float, float]]] | None = None,
                 predicate: Callable[[int, int], bool] | None = None):
        self._iv: dict[int, tuple[tuple[float, float], ...]] = {}
        for t, ivs in (intervals or {}).items():
            ivs = tuple((lo, hi) for lo, hi in ivs if lo <= hi)
            if ivs:
                self._iv[int(t)] = ivs
        self.predicate = predicate

    @classmethod
    def forbid_points(cls, points: Iterable[tuple[int, int]]) -> "Mask":
        iv: dict[int, list] = {}
        for x, t in points:
            iv.setdefault(int(t), []).append((int(x), int(x)))
        return cls(iv)

    @classmethod
    def from_predicate(cls, predicate: Callable[[int, int], bool]) -> "Mask":
        return cls(predicate=predicate)

    @classmethod
    def avoid_segment(cls, seg: Segment) -> "Mask":
        if seg.axis is Axis.VERTICAL:
            return cls({t: [(seg.fixed, seg.fixed)] for t in range(seg.lo, seg.hi + 1)})
        return cls({seg.fixed: [(seg.lo, seg.hi)]})

    @classmethod
    def excursion(cls, u, v) -> "Mask":
        """Forbid the wall strictly between the endpoint heights."""
        t1, t2 = u[1], v[1]
        if t2 - t1 < 2:
            return cls()
        return cls.avoid_segment(Segment.vertical(t1 + 1, t2 - 1))

    def union(self, other: "Mask | None") -> "Mask":
        if other is None or other.empty:
            return self
        if self.empty:
            return other
        iv = {t: list(v) for t, v in self._iv.items()}
        for t, v in other._iv.items():
            iv.setdefault(t, []).extend(v)
        preds = [p for p in (self.predicate, other.predicate) if p is not None]
        if len(preds) == 2:
            p1, p2 = preds
            pred = lambda x, t: p1(x, t) and p2(x, t)  # noqa: E731
        else:
            pred = preds[0] if preds else None
        return Mask(iv, pred)

    @property
    def empty(self) -> bool:
        return not self._iv and self.predicate is None

    def heights(self) -> list[int]:
        return sorted(self._iv)

    def allows(self, x: int, t: int) -> bool:
        for lo, hi in self._iv.get(t, ()):
            if lo <= x <= hi:
                return False
        if self.predicate is not None and not self.predicate(x, t):
            return False
        return True

    def apply(self, t: int, lo: int, values: np.ndarray) -> None:
        """Set forbidden entries of a row slice (covering ``lo..``) to -inf, in place."""
        hi = lo + values.size - 1
        for a, b in self._iv.get(t, ()):
            a = max(lo, a)
            b = min(hi, b)
            if a <= b:
                values[int(a) - lo:int(b) - lo + 1] = -INF
        if self.predicate is not None:
            for x in range(lo, hi + 1):
                if not self.predicate(x, t):
                    values[x - lo] = -INF

    def holds_on(self, path: DirectedPath) -> bool:
        return all(self.allows(x, t) for x, t in path.points())


class Event:
    """Boolean combination of primitive constraints on a single path."""

    def __and__(self, other: "Event") -> "Event":
        return All((self, other))

    def __or__(self, other: "Event") -> "Event":
        return AnyOf((self, other))

    def __invert__(self) -> "Event":
        return Not(self)

    def primitives(self) -> list["Primitive"]:
        raise NotImplementedError

    def evaluate(self, truth: Mapping["Primitive", bool]) -> bool:
        raise NotImplementedError

    def holds(self, path: DirectedPath) -> bool:
        prims = self.primitives()
        return self.evaluate({p: p.holds(path) for p in prims})

    def conjunction(self) -> list["Primitive"] | None:
        """The primitives if this event is a plain conjunction of them, else None."""
        return None


class Primitive(Event):
    def mask(self) -> Mask:
        raise NotImplementedError

    def primitives(self):
        return [self]

    def evaluate(self, truth):
        return truth[self]

    def holds(self, path):
        return self.mask().holds_on(path)

    def conjunction(self):
        return [self]


@dataclass(frozen=True)
class Avoids(Primitive):
    segment: Segment

    def mask(self):
        return Mask.avoid_segment(self.segment)

    def holds(self, path):
        return not path.hits(self.segment)


@dataclass(frozen=True)
class PositionIn(Primitive):
    """``lo <= pi(height) <= hi``; use ``hi=math.inf`` for a one-sided bound."""

    height: int
    lo: float = 0
    hi: float = INF

    def mask(self):
        return Mask({self.height: [(-INF, self.lo - 1), (self.hi + 1, INF)]})

    def holds(self, path):
        if not path.t0 <= self.height <= path.t1:
            return True
        return self.lo <= path.at(self.height) <= self.hi


@dataclass(frozen=True)
class _Constant(Event):
    value: bool

    def primitives(self):
        return []

    def evaluate(self, truth):
        return self.value

    def conjunction(self):
        return [] if self.value else None


ALWAYS = _Constant(True)
NEVER = _Constant(False)


@dataclass(frozen=True)
class Not(Event):
    inner: Event

    def primitives(self):
        return self.inner.primitives()

    def evaluate(self, truth):
        return not self.inner.evaluate(truth)


@dataclass(frozen=True)
class All(Event):
    parts: tuple

    def primitives(self):
        return _unique(p for e in self.parts for p in e.primitives())

    def evaluate(self, truth):
        return all(e.evaluate(truth) for e in self.parts)

    def conjunction(self):
        out = []
        for e in self.parts:
            c = e.conjunction()
            if c is None:
                return None
            out.extend(c)
        return _unique(out)


@dataclass(frozen=True)
class AnyOf(Event):
    parts: tuple

    def primitives(self):
        return _unique(p for e in self.parts for p in e.primitives())

    def evaluate(self, truth):
        return any(e.evaluate(truth) for e in self.parts)


def _unique(prims) -> list:
    seen = {}
    for p in prims:
        seen.setdefault(p, None)
    return list(seen)


def hits(segment: Segment) -> Event:
    return Not(Avoids(segment))


def avoids_wall(s1: int, s2: int) -> Avoids:
    """``pi`` misses ``V_[s1, s2]``."""
    return Avoids(Segment.vertical(s1, s2))


def position_above(height: int, k: int) -> PositionIn:
    """``pi(height) > k``."""
    return PositionIn(height, k + 1, INF)


def everywhere_nonnegative(t1: int, t2: int) -> Event:
    """``pi(t) >= 0`` for every height; vacuous in the half-space."""
    return All(tuple(PositionIn(t, 0, INF) for t in range(t1, t2 + 1)))


def mask_of(prims: Iterable[Primitive]) -> Mask:
    iv: dict[int, list] = {}
    for p in prims:
        for t, ivs in p.mask()._iv.items():
            iv.setdefault(t, []).extend(ivs)
    return Mask(iv)
