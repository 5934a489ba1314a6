"""Semiring dynamic programming for free energies and last passage times.

One recursion serves both temperatures:

    G(x, t) = w(x, t) + G(x - 1, t - 1) (+) G(x + 1, t - 1)

with ``(+)`` the log-sum-exp at positive temperature and ``max`` at zero
temperature.  Unreachable or masked cells hold ``-inf``, which both
semirings absorb without special cases.  Rows are kept in a fixed global
x-frame padded by one cell on each side, so neighbour lookups are plain
slices.

:class:`Transfer` keeps the forward and/or backward tables of a query on
its double cone; sampling, marginals, event probabilities and row
replacement are all read off those tables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .environment import Field
from .errors import InvalidQuery, RegionTooSmall, UnsupportedEvent
from .events import Event, Mask, mask_of
from .lattice import DirectedPath, Point, as_point, feasible

NEG_INF = -math.inf
MAX_PRIMITIVES = 8


class Mode(str, enum.Enum):
    POSITIVE = "positive"
    ZERO = "zero"


class Geometry(str, enum.Enum):
    HALF = "half"
    FULL = "full"


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


def _combine(mode: Mode):
    return np.logaddexp if mode is Mode.POSITIVE else np.maximum


def reduce(values: np.ndarray, mode: Mode) -> float:
    """Semiring sum of a vector: log-sum-exp or max; ``-inf`` when empty."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return NEG_INF
    m = float(values.max())
    if mode is Mode.ZERO or m == NEG_INF:
        return m
    return m + math.log(float(np.exp(values - m).sum()))


@dataclass(frozen=True)
class FreeEnergyQuery:
    u: Point
    v: Point
    mode: Mode = Mode.POSITIVE
    geometry: Geometry = Geometry.HALF
    mask: Mask | None = None

    def __post_init__(self):
        object.__setattr__(self, "u", as_point(self.u))
        object.__setattr__(self, "v", as_point(self.v))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        if not feasible(self.u, self.v):
            raise InvalidQuery(f"no directed path joins {tuple(self.u)} to {tuple(self.v)}")
        if self.mask is not None:
            for p in (self.u, self.v):
                if not self.mask.allows(p.x, p.t):
                    raise InvalidQuery(f"the mask excludes the endpoint {tuple(p)}")

    @property
    def full_space(self) -> bool:
        return self.geometry is Geometry.FULL

    def with_mask(self, mask: Mask | None) -> "FreeEnergyQuery":
        merged = mask if self.mask is None else self.mask.union(mask)
        return FreeEnergyQuery(self.u, self.v, self.mode, self.geometry, merged)

    def with_mode(self, mode: Mode) -> "FreeEnergyQuery":
        return FreeEnergyQuery(self.u, self.v, mode, self.geometry, self.mask)


@dataclass
class Profile:
    """DP slice at one height: ``values[i]`` belongs to ``x = x_lo + i``."""

    anchor: Point
    height: int
    direction: Direction
    x_lo: int
    values: np.ndarray

    def __getitem__(self, x: int) -> float:
        i = x - self.x_lo
        if 0 <= i < self.values.size:
            return float(self.values[i])
        return NEG_INF

    def as_dict(self) -> dict[int, float]:
        return {self.x_lo + i: float(v) for i, v in enumerate(self.values)}

    def finite(self) -> dict[int, float]:
        return {x: v for x, v in self.as_dict().items() if v > NEG_INF}


# ---------------------------------------------------------------- cones


def _double_cone(u, v, full: bool) -> tuple[np.ndarray, np.ndarray]:
    (x1, t1), (x2, t2) = u, v
    ts = np.arange(t1, t2 + 1)
    lo = np.maximum(x1 - (ts - t1), x2 - (t2 - ts))
    hi = np.minimum(x1 + (ts - t1), x2 + (t2 - ts))
    if not full:
        lo = np.maximum(lo, 0)
    return lo, hi


def _single_cone(anchor, t_from: int, t_to: int, full: bool) -> tuple[int, np.ndarray, np.ndarray]:
    """Rows between ``t_from`` and ``t_to`` reachable from ``anchor``; returns (t_min, lo, hi)."""
    x = anchor[0]
    t_min = min(t_from, t_to)
    ts = np.arange(t_min, max(t_from, t_to) + 1)
    d = np.abs(ts - t_from)
    lo = x - d
    if not full:
        lo = np.maximum(lo, 0)
    return t_min, lo, x + d


def _check_cover(env: Field, t_min: int, lo: np.ndarray, hi: np.ndarray) -> None:
    if not env.region.covers(t_min, lo, hi):
        raise RegionTooSmall(f"the environment region {env.region!r} does not cover the reachable cone")


# ---------------------------------------------------------------- sweeps


class _Sweep:
    """Rows of one directional DP in a padded global frame.

    ``table[i]`` is the row at height ``t_min + i``; column ``j`` is
    ``x = frame_lo - 1 + j``.
    """

    def __init__(self, env: Field, anchor, t_from: int, t_to: int, t_min: int, lo: np.ndarray,
                 hi: np.ndarray, mode: Mode, mask: Mask | None, keep: bool | set = False):
        self.mode = mode
        self.t_min = t_min
        self.lo = lo
        self.hi = hi
        ok = lo <= hi
        self.frame_lo = int(lo[ok].min())
        width = int(hi[ok].max()) - self.frame_lo + 3
        step = 1 if t_to >= t_from else -1
        rows = lo.size
        comb = _combine(mode)
        keep_all = keep is True
        self.table = np.full((rows, width), NEG_INF) if keep_all else None
        self.kept: dict[int, np.ndarray] = {}
        mask = None if mask is None or mask.empty else mask

        def idx(x):
            return x - self.frame_lo + 1

        ax, at = anchor
        prev = np.full(width, NEG_INF)
        prev[idx(ax)] = env.row(at, ax, ax)[0]
        if mask is not None:
            mask.apply(at, ax, prev[idx(ax):idx(ax) + 1])
        self._store(at, prev, keep)
        for t in range(t_from + step, t_to + step, step):
            i = t - t_min
            a, b = int(lo[i]), int(hi[i])
            cur = np.full(width, NEG_INF)
            if a <= b:
                i0, i1 = idx(a), idx(b) + 1
                seg = comb(prev[i0 - 1:i1 - 1], prev[i0 + 1:i1 + 1])
                seg += env.row(t, a, b)
                if mask is not None:
                    mask.apply(t, a, seg)
                cur[i0:i1] = seg
            prev = cur
            self._store(t, prev, keep)
        self.last = prev

    def _store(self, t, row, keep):
        if keep is True:
            self.table[t - self.t_min] = row
        elif keep and t in keep:
            self.kept[t] = row

    def row(self, t: int) -> np.ndarray:
        """Padded frame row at height ``t`` (``keep`` must have retained it)."""
        if self.table is not None:
            return self.table[t - self.t_min]
        return self.kept[t]

    def at(self, x: int, t: int) -> float:
        j = x - self.frame_lo + 1
        r = self.row(t)
        if 0 <= j < r.size:
            return float(r[j])
        return NEG_INF


def _forward(env, q: FreeEnergyQuery, keep=False) -> _Sweep:
    lo, hi = _double_cone(q.u, q.v, q.full_space)
    _check_cover(env, q.u.t, lo, hi)
    return _Sweep(env, q.u, q.u.t, q.v.t, q.u.t, lo, hi, q.mode, q.mask, keep)


def _backward(env, q: FreeEnergyQuery, keep=False) -> _Sweep:
    lo, hi = _double_cone(q.u, q.v, q.full_space)
    _check_cover(env, q.u.t, lo, hi)
    return _Sweep(env, q.v, q.v.t, q.u.t, q.u.t, lo, hi, q.mode, q.mask, keep)


def free_energy(query: FreeEnergyQuery, env: Field) -> float:
    """``F = log sum exp H`` or ``L = max H`` over admissible paths; -inf if none."""
    sw = _forward(env, query)
    return float(sw.last[query.v.x - sw.frame_lo + 1])


def profile(query: FreeEnergyQuery, env: Field, height: int, direction: Direction | str) -> Profile:
    """Partial free energies at ``height`` from the anchor endpoint.

    Forward: ``x -> G(u -> (x, height))``; backward: ``x -> G((x, height) -> v)``.
    Both include the weight at ``(x, height)``.
    """
    direction = Direction(direction)
    q = query
    if not q.u.t < height < q.v.t:
        raise InvalidQuery(f"height {height} must lie strictly between {q.u.t} and {q.v.t}")
    anchor = q.u if direction is Direction.FORWARD else q.v
    t_min, lo, hi = _single_cone(anchor, anchor.t, height, q.full_space)
    _check_cover(env, t_min, lo, hi)
    sw = _Sweep(env, anchor, anchor.t, height, t_min, lo, hi, q.mode, q.mask, keep={height})
    i = height - t_min
    a, b = int(lo[i]), int(hi[i])
    row = sw.row(height)
    vals = row[a - sw.frame_lo + 1:b - sw.frame_lo + 2].copy()
    return Profile(anchor, height, direction, a, vals)


def recombine(fwd: Profile, bwd: Profile, env: Field, mode: Mode) -> float:
    """Join forward and backward profiles at their common height."""
    h = fwd.height
    lo = max(fwd.x_lo, bwd.x_lo)
    hi = min(fwd.x_lo + fwd.values.size, bwd.x_lo + bwd.values.size) - 1
    if lo > hi:
        return NEG_INF
    f = fwd.values[lo - fwd.x_lo:hi - fwd.x_lo + 1]
    b = bwd.values[lo - bwd.x_lo:hi - bwd.x_lo + 1]
    w = env.row(h, lo, hi)
    with np.errstate(invalid="ignore"):
        s = np.where((f > NEG_INF) & (b > NEG_INF), f + b - w, NEG_INF)
    return reduce(s, mode)


# ---------------------------------------------------------------- tables


class Transfer:
    """Forward and backward tables of one query on its double cone."""

    def __init__(self, query: FreeEnergyQuery, env: Field, forward: bool = True, backward: bool = False):
        self.query = query
        self.env = env
        self.mode = query.mode
        self.fwd = _forward(env, query, keep=True) if forward else None
        self.bwd = _backward(env, query, keep=True) if backward else None
        if self.fwd is not None:
            self.value = self.fwd.at(query.v.x, query.v.t)
        else:
            self.value = self.bwd.at(query.u.x, query.u.t)
        ref = self.fwd or self.bwd
        self.frame_lo = ref.frame_lo
        self.lo = ref.lo
        self.hi = ref.hi

    def bounds(self, t: int) -> tuple[int, int]:
        i = t - self.query.u.t
        return int(self.lo[i]), int(self.hi[i])

    def _slice(self, sweep: _Sweep, t: int) -> np.ndarray:
        a, b = self.bounds(t)
        return sweep.row(t)[a - self.frame_lo + 1:b - self.frame_lo + 2]

    def forward_row(self, t: int) -> np.ndarray:
        return self._slice(self.fwd, t)

    def backward_row(self, t: int) -> np.ndarray:
        return self._slice(self.bwd, t)

    def _ensure_backward(self):
        if self.bwd is None:
            self.bwd = _backward(self.env, self.query, keep=True)

    def _ensure_forward(self):
        if self.fwd is None:
            self.fwd = _forward(self.env, self.query, keep=True)

    def through(self, t: int) -> tuple[int, np.ndarray]:
        """``x -> G(u -> (x,t) -> v)`` on row ``t`` (weight at (x,t) counted once)."""
        self._ensure_forward()
        self._ensure_backward()
        a, b = self.bounds(t)
        f = self.forward_row(t)
        g = self.backward_row(t)
        w = self.env.row(t, a, b)
        with np.errstate(invalid="ignore"):
            s = np.where((f > NEG_INF) & (g > NEG_INF), f + g - w, NEG_INF)
        return a, s

    def log_marginal(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Positions on row ``t`` and their log quenched probabilities."""
        a, s = self.through(t)
        return np.arange(a, a + s.size), s - self.value

    def replace_row(self, t: int, weights: np.ndarray) -> float:
        """Free energy after replacing the row-``t`` weights of the cone.

        ``weights`` covers ``x = lo..hi`` of :meth:`bounds`.  The other rows
        are untouched, so a single semiring reduction suffices.
        """
        a, s = self.through(t)
        w = self.env.row(t, a, a + s.size - 1)
        with np.errstate(invalid="ignore"):
            s2 = np.where(s > NEG_INF, s - w + np.asarray(weights, dtype=np.float64), NEG_INF)
        return reduce(s2, self.mode)


# ---------------------------------------------------------------- events


def _log_free_energy_with(query: FreeEnergyQuery, env: Field, prims) -> float:
    if not prims:
        return free_energy(query, env)
    m = mask_of(prims)
    for p in (query.u, query.v):
        if not m.allows(p.x, p.t):
            return NEG_INF
    return free_energy(query.with_mask(m), env)


def event_probability(query: FreeEnergyQuery, env: Field, event: Event) -> float:
    """Quenched probability of ``event`` under the polymer measure of ``query``.

    At zero temperature this is the indicator that the leftmost geodesic
    satisfies the event.
    """
    if not isinstance(event, Event):
        raise UnsupportedEvent(f"{event!r} is not an event of the segment/interval algebra")
    if query.mode is Mode.ZERO:
        from .sampling import leftmost_geodesic_for

        path = leftmost_geodesic_for(query, env)
        return 1.0 if event.holds(path) else 0.0
    log_p = log_event_probability(query, env, event)
    return math.exp(log_p) if log_p > NEG_INF else 0.0


def log_event_probability(query: FreeEnergyQuery, env: Field, event: Event) -> float:
    """``log Q(event)`` at positive temperature; -inf for a null event."""
    if query.mode is not Mode.POSITIVE:
        raise UnsupportedEvent("log probabilities are defined at positive temperature only")
    total = free_energy(query, env)
    conj = event.conjunction()
    if conj is not None:
        return min(0.0, _log_free_energy_with(query, env, conj) - total)
    prims = event.primitives()
    if len(prims) > MAX_PRIMITIVES:
        raise UnsupportedEvent(f"{len(prims)} primitives exceed the inclusion-exclusion cap of {MAX_PRIMITIVES}")
    k = len(prims)
    # g[S] = Q(all primitives in S hold)
    g: dict[frozenset, float] = {}
    for r in range(k + 1):
        for s in combinations(range(k), r):
            lf = _log_free_energy_with(query, env, [prims[i] for i in s])
            g[frozenset(s)] = math.exp(lf - total) if lf > NEG_INF else 0.0
    prob = 0.0
    everything = frozenset(range(k))
    for r in range(k + 1):
        for true_set in combinations(range(k), r):
            tset = frozenset(true_set)
            if not event.evaluate({prims[i]: (i in tset) for i in range(k)}):
                continue
            rest = sorted(everything - tset)
            atom = 0.0
            for j in range(len(rest) + 1):
                for extra in combinations(rest, j):
                    atom += (-1) ** j * g[tset | frozenset(extra)]
            prob += atom
    return math.log(prob) if prob > 0 else NEG_INF


# ---------------------------------------------------------------- point-to-line


@dataclass
class PointToLine:
    value: float
    x_lo: int
    terminal: np.ndarray = field(repr=False)
    argmax: int | None = None

    def distribution(self) -> dict[int, float]:
        return {self.x_lo + i: float(p) for i, p in enumerate(self.terminal) if p > 0}


def point_to_line_free_energy(u, target_height: int, mode: Mode | str, env: Field,
                              geometry: Geometry | str = Geometry.HALF, mask: Mask | None = None) -> PointToLine:
    """Free energy over every path from ``u`` to row ``target_height``.

    Returns the terminal-position distribution at positive temperature, or
    the leftmost argmax terminal position at zero temperature.
    """
    u = as_point(u)
    mode = Mode(mode)
    full = Geometry(geometry) is Geometry.FULL
    if target_height <= u.t:
        raise InvalidQuery("target height must exceed the starting height")
    t_min, lo, hi = _single_cone(u, u.t, target_height, full)
    _check_cover(env, t_min, lo, hi)
    sw = _Sweep(env, u, u.t, target_height, t_min, lo, hi, mode, mask, keep={target_height})
    a, b = int(lo[-1]), int(hi[-1])
    ends = sw.row(target_height)[a - sw.frame_lo + 1:b - sw.frame_lo + 2]
    value = reduce(ends, mode)
    if mode is Mode.POSITIVE:
        terminal = np.exp(ends - value) if value > NEG_INF else np.zeros_like(ends)
        return PointToLine(value, a, terminal)
    j = int(np.argmax(ends))  # first maximum, i.e. the leftmost terminal
    terminal = np.zeros_like(ends)
    terminal[j] = 1.0
    return PointToLine(value, a, terminal, argmax=a + j)


def query(u, v, mode: Mode | str = Mode.POSITIVE, geometry: Geometry | str = Geometry.HALF,
          mask: Mask | None = None) -> FreeEnergyQuery:
    """Shorthand constructor accepting tuples and strings."""
    return FreeEnergyQuery(as_point(u), as_point(v), Mode(mode), Geometry(geometry), mask)


def path_free_energy_oracle(paths: list[DirectedPath], env: Field, mode: Mode) -> float:
    """Brute-force reference: reduce the Hamiltonians of an explicit path list."""
    from .lattice import hamiltonian

    return reduce(np.array([hamiltonian(p, env) for p in paths]), mode)
