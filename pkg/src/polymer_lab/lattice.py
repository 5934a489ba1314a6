"""Half-space lattice geometry, directed paths and a brute-force path oracle.

Houses are points ``(x, t)`` of the half-space ``x >= 0``; a directed path
moves up one row per step, either up-left ``(-1, +1)`` or up-right
``(+1, +1)``.  Paths are stored as a start point plus a step string so that
long paths stay cheap, and positions are rebuilt by prefix sums.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceeded, OutOfRegion, PreconditionViolated

DEFAULT_CAP = 10**6


class Step(enum.IntEnum):
    """One lattice step.  ``LEFT < RIGHT`` fixes the enumeration order."""

    LEFT = 0
    RIGHT = 1

    @property
    def dx(self) -> int:
        return -1 if self is Step.LEFT else 1

    @property
    def letter(self) -> str:
        return "L" if self is Step.LEFT else "R"


@dataclass(frozen=True, order=True)
class Point:
    x: int
    t: int

    def __post_init__(self):
        if self.x < 0:
            raise ValueError(f"point {self} lies outside the half-space x >= 0")

    def __iter__(self):
        yield self.x
        yield self.t

    def __getitem__(self, i: int) -> int:
        return (self.x, self.t)[i]


def as_point(p) -> Point:
    return p if isinstance(p, Point) else Point(int(p[0]), int(p[1]))


class Axis(str, enum.Enum):
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class Segment:
    """A closed lattice segment.

    A vertical segment is ``{fixed} x [lo, hi]`` (column ``x = fixed`` over
    heights ``lo..hi``); a horizontal one is ``[lo, hi] x {fixed}``.
    """

    axis: Axis
    fixed: int
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty segment range [{self.lo}, {self.hi}]")

    @classmethod
    def vertical(cls, lo: int, hi: int, x: int = 0) -> "Segment":
        """The wall segment ``V_[lo, hi]`` when ``x == 0``."""
        return cls(Axis.VERTICAL, x, lo, hi)

    @classmethod
    def horizontal(cls, t: int, lo: int, hi: int) -> "Segment":
        return cls(Axis.HORIZONTAL, t, lo, hi)

    def contains(self, x: int, t: int) -> bool:
        if self.axis is Axis.VERTICAL:
            return x == self.fixed and self.lo <= t <= self.hi
        return t == self.fixed and self.lo <= x <= self.hi

    def heights(self) -> tuple[int, int]:
        if self.axis is Axis.VERTICAL:
            return self.lo, self.hi
        return self.fixed, self.fixed


@dataclass(frozen=True)
class DirectedPath:
    """A path stored as its start and a tuple of steps.

    ``half_space=False`` admits full-space paths that dip below ``x = 0``;
    those only arise from full-geometry oracles.
    """

    start: Point | tuple
    steps: tuple[Step, ...]
    half_space: bool = True

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(Step(s) for s in self.steps))
        if self.half_space:
            object.__setattr__(self, "start", as_point(self.start))
            if int(self.positions().min()) < 0:
                raise ValueError("path leaves the half-space")

    @classmethod
    def from_positions(cls, t0: int, xs: Sequence[int], half_space: bool = True) -> "DirectedPath":
        xs = [int(x) for x in xs]
        steps = []
        for a, b in zip(xs, xs[1:]):
            if abs(b - a) != 1:
                raise ValueError(f"positions {a} -> {b} are not one lattice step apart")
            steps.append(Step.RIGHT if b > a else Step.LEFT)
        start = Point(xs[0], t0) if half_space else (xs[0], t0)
        return cls(start, tuple(steps), half_space)

    @classmethod
    def from_string(cls, start, letters: str) -> "DirectedPath":
        return cls(as_point(start), tuple(Step.LEFT if c == "L" else Step.RIGHT for c in letters))

    @property
    def t0(self) -> int:
        return self.start[1]

    @property
    def t1(self) -> int:
        return self.start[1] + len(self.steps)

    @property
    def end(self) -> Point:
        return Point(int(self.positions()[-1]), self.t1)

    def __len__(self) -> int:
        """Number of visited points, ``|pi|`` (steps + 1)."""
        return len(self.steps) + 1

    def positions(self) -> np.ndarray:
        """``pi(t)`` for ``t = t0 .. t1`` as an int64 array."""
        out = np.empty(len(self.steps) + 1, dtype=np.int64)
        out[0] = self.start[0]
        if self.steps:
            np.cumsum(2 * np.asarray(self.steps, dtype=np.int64) - 1, out=out[1:])
            out[1:] += self.start[0]
        return out

    def at(self, t: int) -> int:
        if not self.t0 <= t <= self.t1:
            raise IndexError(f"height {t} outside [{self.t0}, {self.t1}]")
        return int(self.positions()[t - self.t0])

    def points(self) -> Iterator[tuple[int, int]]:
        for i, x in enumerate(self.positions()):
            yield int(x), self.t0 + i

    def step_string(self) -> str:
        return "".join(s.letter for s in self.steps)

    def run_length(self) -> str:
        """Run-length step string, e.g. ``"3L2R"``; empty for a single point."""
        s = self.step_string()
        out = []
        i = 0
        while i < len(s):
            j = i
            while j < len(s) and s[j] == s[i]:
                j += 1
            out.append(f"{j - i}{s[i]}")
            i = j
        return "".join(out)

    def hits(self, segment: Segment) -> bool:
        return any(segment.contains(x, t) for x, t in self.points())

    def concat(self, other: "DirectedPath") -> "DirectedPath":
        if tuple(self.end) != tuple(other.start):
            raise ValueError("paths do not share a junction point")
        return DirectedPath(self.start, self.steps + other.steps, self.half_space and other.half_space)


def feasible(u, v, half_space: bool = True) -> bool:
    """True iff at least one directed path joins ``u`` to ``v``.

    ``half_space`` only matters for the endpoints themselves: inside the
    half-space the zigzag along the feasible cone never needs ``x < 0``
    when both endpoints have ``x >= 0``.
    """
    (x1, t1), (x2, t2) = u, v
    if half_space and (x1 < 0 or x2 < 0):
        return False
    dt = t2 - t1
    dx = x2 - x1
    return dt > 0 and abs(dx) <= dt and (dx - dt) % 2 == 0


def count_paths(u, v, half_space: bool = True) -> int:
    """``|Pi(u; v)|`` as an exact integer; 0 when infeasible."""
    if not feasible(u, v, half_space):
        return 0
    (x1, t1), (x2, t2) = u, v
    if not half_space:
        from math import comb

        dt = t2 - t1
        return comb(dt, (dt + x2 - x1) // 2)
    counts = {x1: 1}
    for t in range(t1 + 1, t2 + 1):
        nxt: dict[int, int] = {}
        remaining = t2 - t
        for x, c in counts.items():
            for y in (x - 1, x + 1):
                if y >= 0 and abs(y - x2) <= remaining:
                    nxt[y] = nxt.get(y, 0) + c
        counts = nxt
    return counts.get(x2, 0)


def _walk(x: int, x2: int, remaining: int, half_space: bool, prefix: list, acc: list, cap: int):
    if remaining == 0:
        if x == x2:
            if len(acc) >= cap:
                raise CapExceeded(f"more than {cap} paths")
            acc.append(tuple(prefix))
        return
    for step in (Step.LEFT, Step.RIGHT):
        y = x + step.dx
        if (half_space and y < 0) or abs(y - x2) > remaining - 1:
            continue
        prefix.append(step)
        _walk(y, x2, remaining - 1, half_space, prefix, acc, cap)
        prefix.pop()


def enumerate_paths(u, v, cap: int = DEFAULT_CAP, half_space: bool = True) -> list[DirectedPath]:
    """Every path from ``u`` to ``v`` exactly once, in lexicographic step order.

    Raises :class:`CapExceeded` when the instance has more than ``cap`` paths.
    """
    if not feasible(u, v, half_space):
        raise PreconditionViolated(f"no directed path joins {tuple(u)} to {tuple(v)}")
    n = count_paths(u, v, half_space)
    if n > cap:
        raise CapExceeded(f"{n} paths exceed the cap of {cap}")
    (x1, t1), (x2, t2) = u, v
    acc: list[tuple] = []
    _walk(x1, x2, t2 - t1, half_space, [], acc, cap)
    start = as_point(u) if half_space else (x1, t1)
    return [DirectedPath(start, steps, half_space) for steps in acc]


def hamiltonian(path: DirectedPath, env) -> float:
    """Sum of the weights on every visited point, both endpoints included.

    The sum runs in path order from the start so that it reproduces the
    dynamic-programming accumulation bit for bit.
    """
    total = 0.0
    for x, t in path.points():
        if not env.contains(x, t):
            raise OutOfRegion(f"no realized weight at ({x}, {t})")
        total = env.weight(x, t) + total
    return total


def catalan(m: int) -> int:
    """Catalan numbers from the convolution recurrence, for cross-checks."""
    c = [1]
    for k in range(m):
        c.append(sum(c[i] * c[k - i] for i in range(k + 1)))
    return c[m]
