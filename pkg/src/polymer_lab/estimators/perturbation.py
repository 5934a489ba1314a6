"""Single-row perturbation diagnostics: influences and Efron-Stein increments.

Both diagnostics replace one row of weights at a time.  With forward and
backward tables of the unperturbed environment, the free energy after
replacing row ``j`` is one semiring reduction over that row, so a replicate
costs two sweeps however many rows are probed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats as sps

from ..engine import FreeEnergyQuery, Mode, Transfer
from ..environment import Constant, Distribution, Exponential, Gamma, Region, WeightSpec, resampled_row_values
from ..errors import PreconditionViolated
from . import stats
from .common import (EnvSource, Tabular, as_mode, aux_seed, check_even, check_replicates, replicate_environment,
                     replicate_map)


def _cdf(law: Distribution, b: float) -> float:
    if isinstance(law, Exponential):
        return float(sps.expon.cdf(b, scale=1 / law.rate))
    if isinstance(law, Gamma):
        return float(sps.gamma.cdf(b, law.shape, scale=1 / law.rate))
    if isinstance(law, Constant):
        return 1.0 if b >= law.value else 0.0
    raise TypeError(f"no distribution function for {law!r}")


def row_maximum_quantile(spec: WeightSpec, x_max: int, level: float = 0.9) -> float:
    """Smallest ``B`` with ``P(max_{x <= x_max} w(x, j) <= B) >= level``."""

    def prob(b: float) -> float:
        return _cdf(spec.vertical, b) * _cdf(spec.bulk, b) ** x_max

    if isinstance(spec.vertical, Constant) and isinstance(spec.bulk, Constant):
        return max(spec.vertical.value, spec.bulk.value)
    hi = 1.0
    while prob(hi) < level:
        hi *= 2
    return float(optimize.brentq(lambda b: prob(b) - level, 0.0, hi, xtol=1e-12))


# ---------------------------------------------------------------- influence


@dataclass(frozen=True)
class _InfluenceTask:
    spec: WeightSpec
    n: int
    rows: tuple[int, ...]
    x_max: int
    b_low: float
    b_high: float
    seed: int
    mode: Mode

    def __call__(self, r: int) -> list[float]:
        env = replicate_environment(self.spec, Region.cone((0, 0), (0, self.n)), self.seed, "influence", r)
        table = Transfer(FreeEnergyQuery((0, 0), (0, self.n), self.mode), env, forward=True, backward=True)
        out = []
        for j in self.rows:
            lo, hi = table.bounds(j)
            base = env.row(j, lo, hi)
            xs = np.arange(lo, hi + 1)
            hit = xs <= self.x_max
            high = np.where(hit, self.b_high, base)
            low = np.where(hit, self.b_low, base)
            out.append(table.replace_row(j, high) - table.replace_row(j, low))
        return out


@dataclass
class InfluenceResult(Tabular):
    n: int
    mode: Mode
    rows: tuple[int, ...]
    x_max: int
    b_low: float
    b_high: float
    epsilon: float
    deltas: np.ndarray = field(repr=False)
    env_source: EnvSource | None = None

    @property
    def mean_delta(self) -> np.ndarray:
        return self.deltas.mean(axis=0)

    @property
    def fraction_above(self) -> np.ndarray:
        """Per row, the fraction of replicates with ``Delta_j >= epsilon``."""
        return (self.deltas >= self.epsilon).mean(axis=0)

    def summary_rows(self):
        return [{"n": self.n, "mode": self.mode.value, "row": j, "x_max": self.x_max, "B_low": self.b_low,
                 "B_high": self.b_high, "epsilon": self.epsilon, "replicates": self.deltas.shape[0],
                 "mean_delta": float(m), "fraction_at_least_epsilon": float(f)}
                for j, m, f in zip(self.rows, self.mean_delta, self.fraction_above)]

    def replicate_rows(self):
        return [{"replicate": r, "row": j, "delta": float(self.deltas[r, i])}
                for r in range(self.deltas.shape[0]) for i, j in enumerate(self.rows)]


def influence_profile(spec: WeightSpec, n: int, rows: Sequence[int], x_max: int, B_low: float, B_high: float,
                      replicates: int, mode=Mode.POSITIVE, seed: int = 0, threads: int | None = None,
                      epsilon: float = 0.1) -> InfluenceResult:
    """``Delta_j = G(row j set to B_high on [0, x_max]) - G(same with B_low)`` for each row."""
    mode = as_mode(mode)
    n = check_even(n)
    check_replicates(replicates, 1, "influence_profile")
    if not 0 < B_low <= B_high:
        raise PreconditionViolated(f"need 0 < B_low <= B_high, got {B_low}, {B_high}")
    if x_max < 0:
        raise PreconditionViolated("x_max must be nonnegative")
    rows = tuple(int(j) for j in rows)
    if any(not 0 <= j <= n for j in rows):
        raise PreconditionViolated(f"rows must lie in [0, {n}]")
    task = _InfluenceTask(spec, n, rows, int(x_max), float(B_low), float(B_high), int(seed), mode)
    deltas = np.array(replicate_map(task, replicates, threads), dtype=np.float64).reshape(replicates, len(rows))
    return InfluenceResult(n, mode, rows, int(x_max), float(B_low), float(B_high), float(epsilon), deltas,
                           EnvSource(spec, Region.cone((0, 0), (0, n)), seed, "influence"))


# ---------------------------------------------------------------- Efron-Stein


@dataclass(frozen=True)
class _EfronSteinTask:
    spec: WeightSpec
    n: int
    seed: int
    mode: Mode

    def __call__(self, r: int) -> tuple[float, float]:
        env = replicate_environment(self.spec, Region.cone((0, 0), (0, self.n)), self.seed, "efron-stein", r)
        table = Transfer(FreeEnergyQuery((0, 0), (0, self.n), self.mode), env, forward=True, backward=True)
        g = table.value
        key = aux_seed(self.seed, "efron-stein", r)
        total = 0.0
        for j in range(self.n + 1):
            lo, hi = table.bounds(j)
            fresh = resampled_row_values(env, j, key, lo, hi)
            total += (g - table.replace_row(j, fresh)) ** 2
        return g, 0.5 * total


@dataclass
class EfronSteinResult(Tabular):
    n: int
    mode: Mode
    G: np.ndarray = field(repr=False)
    half_sums: np.ndarray = field(repr=False)
    env_source: EnvSource | None = None

    @property
    def variance(self) -> float:
        return float(self.G.var(ddof=1)) if np.ptp(self.G) > 0 else 0.0

    @property
    def efron_stein(self) -> float:
        return float(self.half_sums.mean())

    def ratio(self) -> tuple[float, float]:
        """``Var(G) / (1/2 sum_j E[(G - G_j')^2])`` and its jackknife error; NaN when both vanish."""
        if self.efron_stein == 0:
            return math.nan, math.nan
        return stats.jackknife_ratio(self.G, self.half_sums)

    def summary_rows(self):
        ratio, se = self.ratio()
        return [{"n": self.n, "mode": self.mode.value, "replicates": self.G.size, "variance": self.variance,
                 "efron_stein_sum": self.efron_stein, "ratio": ratio, "ratio_se": se}]

    def replicate_rows(self):
        return [{"replicate": r, "G": float(g), "half_sum_sq_increments": float(h)}
                for r, (g, h) in enumerate(zip(self.G, self.half_sums))]


def efron_stein_sum(spec: WeightSpec, n: int, replicates: int, mode=Mode.POSITIVE, seed: int = 0,
                    threads: int | None = None) -> EfronSteinResult:
    """Row-resampling Efron-Stein bound next to the sample variance of ``G(0,0; 0,n)``.

    Every row ``j = 0..n`` of the cone is an independent block of
    coordinates; ``G_j'`` uses an independent redraw of that row.
    """
    mode = as_mode(mode)
    n = check_even(n)
    check_replicates(replicates, 50, "efron_stein_sum")
    out = np.array(replicate_map(_EfronSteinTask(spec, n, int(seed), mode), replicates, threads))
    return EfronSteinResult(n, mode, out[:, 0], out[:, 1], EnvSource(spec, Region.cone((0, 0), (0, n)), seed,
                                                                      "efron-stein"))
