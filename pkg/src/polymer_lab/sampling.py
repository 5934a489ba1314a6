"""Exact polymer sampling, leftmost geodesics and the ordered coupling.

Draws walk down from the upper endpoint: at ``(x, t)`` the predecessor
``x - 1`` or ``x + 1`` on row ``t - 1`` is chosen with probability
proportional to ``exp`` of its forward partial free energy.  This realizes
the polymer measure exactly, and one forward table serves any number of
draws.

The coupling of two polymers with ordered endpoints follows the
suffix-swap construction: two independent polymers sharing their top
endpoint are run until they first meet, after which the left one adopts
the right one's remaining journey; a second, time-reversed swap handles
distinct top endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import keyed
from .engine import NEG_INF, FreeEnergyQuery, Geometry, Mode, Transfer
from .environment import Field
from .errors import PreconditionViolated
from .lattice import DirectedPath, Point, as_point, feasible, hamiltonian


def rng_stream(master: int, *labels: str | int) -> np.random.Generator:
    """Independent generator for the substream ``labels`` of ``master``.

    Typical labels are ``(experiment, replicate, draw)``.
    """
    key = [keyed.label_to_int(lab) & 0xFFFFFFFF for lab in labels]
    key += [keyed.label_to_int(lab) >> 32 for lab in labels]
    ss = np.random.SeedSequence(master & keyed.MASK64, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class PolymerSample:
    path: DirectedPath
    log_density: float


class PolymerSampler:
    """Cached forward table for repeated exact draws between fixed endpoints."""

    def __init__(self, u, v, env: Field, mask=None):
        self.u = as_point(u)
        self.v = as_point(v)
        self.env = env
        self.query = FreeEnergyQuery(self.u, self.v, Mode.POSITIVE, Geometry.HALF, mask)
        self.table = Transfer(self.query, env, forward=True)
        self.free_energy = self.table.value
        if self.free_energy == NEG_INF:
            raise PreconditionViolated("no admissible path between the endpoints")

    def positions(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` independent draws as a ``(count, v.t - u.t + 1)`` int array."""
        sw = self.table.fwd
        t1, t2 = self.u.t, self.v.t
        out = np.empty((count, t2 - t1 + 1), dtype=np.int64)
        xs = np.full(count, self.v.x, dtype=np.int64)
        out[:, -1] = xs
        base = 1 - sw.frame_lo
        for t in range(t2, t1, -1):
            row = sw.row(t - 1)
            a = row[xs - 1 + base]
            b = row[xs + 1 + base]
            with np.errstate(invalid="ignore"):
                p_left = np.exp(a - np.logaddexp(a, b))
            go_left = rng.random(count) < p_left
            xs = np.where(go_left, xs - 1, xs + 1)
            out[:, t - 1 - t1] = xs
        return out

    def sample(self, rng: np.random.Generator) -> PolymerSample:
        xs = self.positions(rng, 1)[0]
        path = DirectedPath.from_positions(self.u.t, xs)
        return PolymerSample(path, hamiltonian(path, self.env) - self.free_energy)


def sample_polymer(u, v, env: Field, rng: np.random.Generator) -> PolymerSample:
    """One exact draw from the polymer measure ``Q^{u;v}``."""
    return PolymerSampler(u, v, env).sample(rng)


def _geodesic_from_table(q: FreeEnergyQuery, table: Transfer) -> DirectedPath:
    sw = table.fwd
    xs = np.empty(q.v.t - q.u.t + 1, dtype=np.int64)
    x = q.v.x
    xs[-1] = x
    for t in range(q.v.t, q.u.t, -1):
        a = sw.at(x - 1, t - 1)
        b = sw.at(x + 1, t - 1)
        x = x - 1 if a >= b else x + 1
        xs[t - 1 - q.u.t] = x
    return DirectedPath.from_positions(q.u.t, xs, half_space=not q.full_space)


def leftmost_geodesic_for(query: FreeEnergyQuery, env: Field) -> DirectedPath:
    """Leftmost maximizer of the Hamiltonian among the query's admissible paths."""
    q = query.with_mode(Mode.ZERO)
    table = Transfer(q, env, forward=True)
    if table.value == NEG_INF:
        raise PreconditionViolated("no admissible path between the endpoints")
    return _geodesic_from_table(q, table)


def leftmost_geodesic(u, v, env: Field) -> DirectedPath:
    """The pointwise-leftmost geodesic (ties broken toward smaller x)."""
    return leftmost_geodesic_for(FreeEnergyQuery(as_point(u), as_point(v), Mode.ZERO), env)


# ---------------------------------------------------------------- coupling


@dataclass(frozen=True)
class CoupledPair:
    left: DirectedPath
    right: DirectedPath
    meet_low: Point | None
    meet_high: Point | None

    def ordered(self) -> bool:
        return bool(np.all(self.left.positions() <= self.right.positions()))


def _first_meeting(a: np.ndarray, b: np.ndarray) -> int | None:
    hit = np.nonzero(a == b)[0]
    return int(hit[0]) if hit.size else None


def _swap_from_bottom(left: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, int | None]:
    """Left path adopts the right one's suffix from their first meeting."""
    i = _first_meeting(left, right)
    if i is None:
        return left, None
    out = left.copy()
    out[i:] = right[i:]
    return out, i


def _contact(left: np.ndarray, right: np.ndarray, t0: int) -> tuple[Point | None, Point | None]:
    hit = np.nonzero(left == right)[0]
    if not hit.size:
        return None, None
    return Point(int(left[hit[0]]), t0 + int(hit[0])), Point(int(left[hit[-1]]), t0 + int(hit[-1]))


def coupled_pair(u, v, u2, v2, env: Field, rng: np.random.Generator,
                 mode: Mode | str = Mode.POSITIVE) -> CoupledPair:
    """Ordered, coalescing coupling of ``Q^{u;v}`` (left) and ``Q^{u2;v2}`` (right).

    Requires equal start heights, equal end heights, ``u.x <= u2.x``,
    ``v.x <= v2.x`` and both pairs feasible.  The two starts must have the
    same parity, otherwise the paths can swap sides without ever sharing a
    point.
    """
    u, v, u2, v2 = (as_point(p) for p in (u, v, u2, v2))
    mode = Mode(mode)
    if u.t != u2.t or v.t != v2.t:
        raise PreconditionViolated("coupled polymers need common start and end heights")
    if u.x > u2.x or v.x > v2.x:
        raise PreconditionViolated("left endpoints must lie weakly left of the right endpoints")
    if not (feasible(u, v) and feasible(u2, v2)):
        raise PreconditionViolated("both endpoint pairs must be joined by a path")
    if (u2.x - u.x) % 2:
        raise PreconditionViolated("start points of different parity cannot be coupled by suffix swaps")

    if mode is Mode.ZERO:
        left = leftmost_geodesic(u, v, env)
        right = leftmost_geodesic(u2, v2, env)
        lo, hi = _contact(left.positions(), right.positions(), u.t)
        return CoupledPair(left, right, lo, hi)

    a = PolymerSampler(u, v, env).positions(rng, 1)[0]
    if not feasible(u2, v):
        # The two polymers cannot share a point, so independent draws are already ordered.
        c = PolymerSampler(u2, v2, env).positions(rng, 1)[0]
        left_x, right_x = a, c
    else:
        b = PolymerSampler(u2, v, env).positions(rng, 1)[0]
        left_x, _ = _swap_from_bottom(a, b)
        if v2 == v:
            right_x = b
        else:
            c = PolymerSampler(u2, v2, env).positions(rng, 1)[0]
            # time reversal: run b and c downward from the top, swapping c's lower part for b's
            rev, _ = _swap_from_bottom(c[::-1], b[::-1])
            right_x = rev[::-1]
    left = DirectedPath.from_positions(u.t, left_x)
    right = DirectedPath.from_positions(u.t, right_x)
    lo, hi = _contact(left_x, right_x, u.t)
    return CoupledPair(left, right, lo, hi)


@dataclass(frozen=True)
class Coalescence:
    overlap_interval: tuple[int, int] | None
    overlap_length: int
    connected: bool


def coalescence_summary(pair: CoupledPair) -> Coalescence:
    """Heights where the two paths coincide.

    ``overlap_length`` counts shared heights; ``connected`` is False if the
    shared heights do not form one interval.
    """
    a = pair.left.positions()
    b = pair.right.positions()
    t0 = pair.left.t0
    hit = np.nonzero(a == b)[0]
    if not hit.size:
        return Coalescence(None, 0, True)
    connected = bool(hit[-1] - hit[0] + 1 == hit.size)
    return Coalescence((t0 + int(hit[0]), t0 + int(hit[-1])), int(hit.size), connected)
