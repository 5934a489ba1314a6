"""Quenched pinning probabilities: wall avoidance and midpoint tails.

For every replicate environment the probabilities are exact (masked free
energies or transfer marginals), so the Monte Carlo error is purely over
environments.  Probabilities are carried on the log scale because the
interesting ones are tiny.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..engine import NEG_INF, Direction, FreeEnergyQuery, Mode, free_energy, profile, reduce
from ..environment import Region, WeightSpec
from ..errors import PreconditionViolated
from ..events import Mask
from ..lattice import Segment
from ..sampling import leftmost_geodesic
from . import stats
from .common import EnvSource, Tabular, as_mode, check_even, check_replicates, replicate_environment, replicate_map


@dataclass(frozen=True)
class ProbabilityPoint:
    parameter: int
    median: float
    log_median: float
    q90: float
    q99: float
    mean: float


@dataclass
class ProbabilityCurve(Tabular):
    """Per-parameter distributions (over environments) of a quenched probability."""

    quantity: str
    parameter_name: str
    n: int
    mode: Mode
    points: list[ProbabilityPoint]
    log_probabilities: np.ndarray = field(repr=False)
    fit: stats.LinearFit
    fit_offset: int = 0
    env_source: EnvSource | None = None

    def point(self, parameter: int) -> ProbabilityPoint:
        for p in self.points:
            if p.parameter == parameter:
                return p
        raise KeyError(parameter)

    def medians(self) -> np.ndarray:
        return np.array([p.median for p in self.points])

    def summary_rows(self):
        return [{"n": self.n, "mode": self.mode.value, self.parameter_name: p.parameter,
                 "replicates": self.log_probabilities.shape[0], "median": p.median, "log_median": p.log_median,
                 "q90": p.q90, "q99": p.q99, "mean": p.mean, "fit_slope": self.fit.slope,
                 "fit_intercept": self.fit.intercept, "fit_r_squared": self.fit.r_squared}
                for p in self.points]

    def replicate_rows(self):
        rows = []
        for r in range(self.log_probabilities.shape[0]):
            for i, p in enumerate(self.points):
                lp = float(self.log_probabilities[r, i])
                rows.append({"replicate": r, self.parameter_name: p.parameter,
                             "log_probability": lp, "probability": math.exp(lp) if lp > NEG_INF else 0.0})
        return rows


def _summarize(log_p: np.ndarray, params, param_name: str, quantity: str, n: int, mode: Mode,
               fit_x, fit_range, offset: int, source: EnvSource) -> ProbabilityCurve:
    points = []
    for i, par in enumerate(params):
        col = log_p[:, i]
        lm = stats.log_median(col)
        probs = np.exp(col)
        points.append(ProbabilityPoint(int(par), math.exp(lm), lm, float(np.quantile(probs, 0.9)),
                                       float(np.quantile(probs, 0.99)), float(probs.mean())))
    xs = np.asarray(fit_x, dtype=np.float64)
    ys = np.array([p.log_median for p in points])
    sel = np.ones(xs.size, dtype=bool)
    if fit_range is not None:
        sel = (xs >= fit_range[0]) & (xs <= fit_range[1])
    fit = stats.linear_fit(xs[sel], ys[sel])
    return ProbabilityCurve(quantity, param_name, n, mode, points, log_p, fit, offset, source)


# ---------------------------------------------------------------- wall avoidance


@dataclass(frozen=True)
class _PinningTask:
    spec: WeightSpec
    n: int
    s1: int
    s2_list: tuple[int, ...]
    seed: int
    mode: Mode

    def __call__(self, r: int) -> list[float]:
        env = replicate_environment(self.spec, Region.cone((0, 0), (0, self.n)), self.seed, "pinning", r)
        if self.mode is Mode.ZERO:
            path = leftmost_geodesic((0, 0), (0, self.n), env)
            return [NEG_INF if path.hits(Segment.vertical(self.s1, s2)) else 0.0 for s2 in self.s2_list]
        q = FreeEnergyQuery((0, 0), (0, self.n), self.mode)
        total = free_energy(q, env)
        out = []
        for s2 in self.s2_list:
            masked = free_energy(q.with_mask(Mask.avoid_segment(Segment.vertical(self.s1, s2))), env)
            out.append(min(0.0, masked - total) if masked > NEG_INF else NEG_INF)
        return out


def pinning_curve(spec: WeightSpec, n: int, s1: int, s2_list, replicates: int, mode=Mode.POSITIVE,
                  seed: int = 0, threads: int | None = None, fit_range=None) -> ProbabilityCurve:
    """Distribution over environments of ``Q(path avoids the wall on [s1, s2])``.

    At zero temperature the probability is the indicator that the leftmost
    geodesic avoids the segment.  The fit regresses ``log(median)`` on
    ``s2 - s1`` (optionally restricted to ``fit_range`` of that length).
    """
    mode = as_mode(mode)
    n = check_even(n)
    check_replicates(replicates, 1, "pinning_curve")
    s2_list = tuple(int(s) for s in s2_list)
    if s1 < 1 or any(s2 < s1 or s2 > n - 1 for s2 in s2_list):
        raise PreconditionViolated(f"need 1 <= s1 <= s2 <= n - 1, got s1={s1}, s2 in {s2_list}")
    task = _PinningTask(spec, n, int(s1), s2_list, int(seed), mode)
    log_p = np.array(replicate_map(task, replicates, threads), dtype=np.float64).reshape(replicates, len(s2_list))
    lengths = [s2 - s1 for s2 in s2_list]
    src = EnvSource(spec, Region.cone((0, 0), (0, n)), seed, "pinning")
    return _summarize(log_p, s2_list, "s2", "avoid_wall", n, mode, lengths, fit_range, s1, src)


# ---------------------------------------------------------------- midpoint tail


def midpoint_log_tail(env, n: int, k_list, mode: Mode) -> list[float]:
    """``log Q(pi(n/2) > k)`` for each ``k`` on one environment (zero temperature: 0 or -inf)."""
    h = n // 2
    if mode is Mode.ZERO:
        x = leftmost_geodesic((0, 0), (0, n), env).at(h)
        return [0.0 if x > k else NEG_INF for k in k_list]
    q = FreeEnergyQuery((0, 0), (0, n), mode)
    fwd = profile(q, env, h, Direction.FORWARD)
    bwd = profile(q, env, h, Direction.BACKWARD)
    lo = max(fwd.x_lo, bwd.x_lo)
    hi = min(fwd.x_lo + fwd.values.size, bwd.x_lo + bwd.values.size) - 1
    xs = np.arange(lo, hi + 1)
    f = fwd.values[lo - fwd.x_lo:hi - fwd.x_lo + 1]
    b = bwd.values[lo - bwd.x_lo:hi - bwd.x_lo + 1]
    with np.errstate(invalid="ignore"):
        s = np.where((f > NEG_INF) & (b > NEG_INF), f + b - env.row(h, lo, hi), NEG_INF)
    total = reduce(s, mode)
    out = []
    for k in k_list:
        tail = reduce(s[xs > k], mode)
        out.append(min(0.0, tail - total) if tail > NEG_INF else NEG_INF)
    return out


@dataclass(frozen=True)
class _MidpointTask:
    spec: WeightSpec
    n: int
    k_list: tuple[int, ...]
    seed: int
    mode: Mode

    def __call__(self, r: int) -> list[float]:
        env = replicate_environment(self.spec, Region.cone((0, 0), (0, self.n)), self.seed, "midpoint", r)
        return midpoint_log_tail(env, self.n, self.k_list, self.mode)


def midpoint_tail(spec: WeightSpec, n: int, k_list, replicates: int, mode=Mode.POSITIVE, seed: int = 0,
                  threads: int | None = None, fit_range=None) -> ProbabilityCurve:
    """Distribution over environments of ``Q(pi(n/2) > k)``, with a log-linear fit of the median in ``k``."""
    mode = as_mode(mode)
    n = check_even(n)
    check_replicates(replicates, 1, "midpoint_tail")
    k_list = tuple(int(k) for k in k_list)
    if any(k < 0 for k in k_list):
        raise PreconditionViolated("tail thresholds must be nonnegative")
    task = _MidpointTask(spec, n, k_list, int(seed), mode)
    log_p = np.array(replicate_map(task, replicates, threads), dtype=np.float64).reshape(replicates, len(k_list))
    src = EnvSource(spec, Region.cone((0, 0), (0, n)), seed, "midpoint")
    return _summarize(log_p, k_list, "k", "midpoint_tail", n, mode, k_list, fit_range, 0, src)
