"""Statistics of the point-to-point free energy ``G(0,0; 0,n)``.

Variance growth, Gaussian fluctuations and large-deviation frequencies all
consume the same per-environment values, so they share one memo: replicate
``r`` always uses the environment seeded by ``(seed, "endpoint", r)`` and
regions are nested, hence a value once computed is valid for every later
request with the same spec, seed and truncation rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..engine import FreeEnergyQuery, Mode, free_energy
from ..environment import Region, WeightSpec, truncate
from ..errors import DegenerateSample, PreconditionViolated
from . import stats
from .common import (EnvSource, Tabular, as_mode, check_even, check_replicates, format_row,
                     replicate_environment, replicate_map)

LABEL = "endpoint"
MODES = (Mode.POSITIVE, Mode.ZERO)

_MEMO: dict[tuple, dict[int, dict[tuple[int, Mode], float]]] = {}


def clear_memo() -> None:
    _MEMO.clear()


@dataclass(frozen=True)
class _EndpointTask:
    spec: WeightSpec
    heights: tuple[int, ...]
    seed: int
    cutoff_power: float | None

    def __call__(self, r: int) -> dict[tuple[int, Mode], float]:
        top = max(self.heights)
        env = replicate_environment(self.spec, Region.cone((0, 0), (0, top)), self.seed, LABEL, r)
        out = {}
        for n in self.heights:
            field_n = env if self.cutoff_power is None else truncate(env, n ** self.cutoff_power)
            for mode in MODES:
                out[(n, mode)] = free_energy(FreeEnergyQuery((0, 0), (0, n), mode), field_n)
        return out


def endpoint_samples(spec: WeightSpec, heights: Sequence[int], replicates: int, seed: int = 0,
                     threads: int | None = None, cutoff_power: float | None = None
                     ) -> dict[tuple[int, Mode], np.ndarray]:
    """``G(0,0; 0,n)`` for every height, both temperatures and replicates ``0..replicates-1``.

    With ``cutoff_power`` the weights are truncated at ``n ** cutoff_power``.
    """
    heights = tuple(sorted({check_even(n) for n in heights}))
    key = (spec, int(seed), cutoff_power)
    memo = _MEMO.setdefault(key, {})
    wanted = [(n, m) for n in heights for m in MODES]
    missing = [r for r in range(replicates) if r not in memo or any(k not in memo[r] for k in wanted)]
    if missing:
        task = _EndpointTask(spec, heights, int(seed), cutoff_power)
        for r, values in zip(missing, replicate_map(task, missing, threads)):
            memo.setdefault(r, {}).update(values)
    return {k: np.array([memo[r][k] for r in range(replicates)]) for k in wanted}


# ---------------------------------------------------------------- variance


@dataclass(frozen=True)
class VariancePoint:
    n: int
    mean: float
    variance: float
    jackknife_se: float

    @property
    def ratio(self) -> float:
        return self.variance / self.n


@dataclass
class VarianceCurve(Tabular):
    mode: Mode
    replicates: int
    points: list[VariancePoint]
    samples: dict[int, np.ndarray] = field(repr=False)
    fit: stats.LinearFit
    env_source: EnvSource | None = None

    @property
    def ratios(self) -> np.ndarray:
        return np.array([p.ratio for p in self.points])

    @property
    def spread(self) -> float:
        """``max(Var/n) / min(Var/n)``; NaN when some variance vanishes."""
        r = self.ratios
        return float(r.max() / r.min()) if r.min() > 0 else math.nan

    @property
    def spread_about_median(self) -> float:
        """Largest factor separating a ``Var/n`` ratio from the median ratio."""
        r = self.ratios
        med = float(np.median(r))
        if med <= 0 or r.min() <= 0:
            return math.nan
        return float(max(r.max() / med, med / r.min()))

    def summary_rows(self):
        return [{"n": p.n, "mode": self.mode.value, "replicates": self.replicates, "mean": p.mean,
                 "variance": p.variance, "jackknife_se": p.jackknife_se, "variance_over_n": p.ratio,
                 "slope": self.fit.slope, "intercept": self.fit.intercept, "r_squared": self.fit.r_squared}
                for p in self.points]

    def replicate_rows(self):
        return [{"replicate": r, "n": p.n, "G": float(self.samples[p.n][r])}
                for r in range(self.replicates) for p in self.points]


def variance_curve(spec: WeightSpec, n_list: Sequence[int], replicates: int, mode=Mode.POSITIVE,
                   seed: int = 0, threads: int | None = None, require_unbounded: bool = False) -> VarianceCurve:
    """Sample variances of ``G(0,0; 0,n)`` over independent environments.

    ``require_unbounded`` guards the linear lower bound, which needs weight
    laws with unbounded support; a degenerate spec then raises
    :class:`InadmissibleSpec` instead of reporting zero variance.
    """
    mode = as_mode(mode)
    if require_unbounded:
        spec.require_unbounded("the variance lower bound")
    check_replicates(replicates, 100, "variance_curve")
    heights = [check_even(n) for n in n_list]
    data = endpoint_samples(spec, heights, replicates, seed, threads)
    points, samples = [], {}
    for n in heights:
        g = data[(n, mode)]
        var, se = stats.jackknife_variance(g)
        points.append(VariancePoint(n, float(g.mean()), var, se))
        samples[n] = g
    fit = stats.linear_fit([p.n for p in points], [p.variance for p in points])
    src = EnvSource(spec, Region.cone((0, 0), (0, max(heights))), seed, LABEL)
    return VarianceCurve(mode, replicates, points, samples, fit, src)


# ---------------------------------------------------------------- CLT


@dataclass
class CLTResult(Tabular):
    n: int
    mode: Mode
    mean: float
    sd: float
    values: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    report: stats.NormalityReport = field(repr=False)
    env_source: EnvSource | None = None

    @property
    def ks_pass(self) -> bool:
        return self.report.ks_pass

    def summary_rows(self):
        rep = self.report
        base = {"n": self.n, "mode": self.mode.value, "replicates": rep.size, "mean": self.mean, "sd": self.sd,
                "ks_statistic": rep.ks_statistic, "ks_critical": rep.ks_critical, "ks_pvalue": rep.ks_pvalue,
                "ad_statistic": rep.ad_statistic}
        return [{**base, "probability": float(p), "normal_quantile": float(a), "sample_quantile": float(b)}
                for p, a, b in zip(rep.probabilities, rep.theoretical, rep.empirical)]

    def summary_lines(self):
        rep = self.report
        return [format_row({"n": self.n, "mode": self.mode.value, "replicates": rep.size, "mean": self.mean,
                            "sd": self.sd, "ks_statistic": rep.ks_statistic, "ks_critical": rep.ks_critical,
                            "ad_statistic": rep.ad_statistic, "ks_pass": rep.ks_pass})]

    def replicate_rows(self):
        return [{"replicate": r, "G": float(g), "z": float(z)} for r, (g, z) in enumerate(zip(self.values, self.z))]


def standardize(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    scale = max(abs(mean), 1.0)
    if not sd > 1e-12 * scale:
        raise DegenerateSample("the sample has zero variance and cannot be standardized")
    return (values - mean) / sd, mean, sd


def clt_sample(spec: WeightSpec, n: int, replicates: int, mode=Mode.POSITIVE, seed: int = 0,
               threads: int | None = None, alpha: float = 0.01) -> CLTResult:
    """Standardized free energies and their distance from the standard normal law."""
    mode = as_mode(mode)
    n = check_even(n)
    check_replicates(replicates, 1000, "clt_sample")
    values = endpoint_samples(spec, [n], replicates, seed, threads)[(n, mode)]
    z, mean, sd = standardize(values)
    src = EnvSource(spec, Region.cone((0, 0), (0, n)), seed, LABEL)
    return CLTResult(n, mode, mean, sd, values, z, stats.normality(z, alpha), src)


# ---------------------------------------------------------------- large deviations


@dataclass(frozen=True)
class ExceedancePoint:
    t: int
    threshold: float
    frequency: float
    ci_low: float
    ci_high: float
    exceedances: int


@dataclass
class LDPResult(Tabular):
    mode: Mode
    delta: float
    replicates: int
    points: list[ExceedancePoint]
    deviations: dict[int, np.ndarray] = field(repr=False)
    envelope: stats.LinearFit
    env_source: EnvSource | None = None

    @property
    def nonincreasing_within_ci(self) -> bool:
        """Every frequency is compatible with the previous one not being exceeded."""
        return all(b.ci_low <= a.ci_high for a, b in zip(self.points, self.points[1:]))

    @property
    def envelope_constants(self) -> tuple[float, float]:
        """``(C, C')`` of the fitted envelope ``C exp(-C' t^(1/3))``."""
        return math.exp(self.envelope.intercept), -self.envelope.slope

    def summary_rows(self):
        c, c_prime = self.envelope_constants if math.isfinite(self.envelope.slope) else (math.nan, math.nan)
        return [{"t": p.t, "mode": self.mode.value, "delta": self.delta, "threshold": p.threshold,
                 "replicates": self.replicates, "exceedances": p.exceedances, "frequency": p.frequency,
                 "ci_low": p.ci_low, "ci_high": p.ci_high, "envelope_C": c, "envelope_C_prime": c_prime}
                for p in self.points]

    def replicate_rows(self):
        return [{"replicate": r, "t": p.t, "abs_deviation": float(self.deviations[p.t][r])}
                for r in range(self.replicates) for p in self.points]


def ldp_check(spec: WeightSpec, t_list: Sequence[int], delta: float | None, replicates: int,
              mode=Mode.POSITIVE, seed: int = 0, threads: int | None = None,
              cutoff_power: float | None = None, level: float = 0.95) -> LDPResult:
    """Empirical ``P(|G - mean| > delta t)`` per height with Wilson intervals.

    ``delta=None`` takes the gap estimate at the largest height.
    ``cutoff_power`` truncates the weights at ``t ** cutoff_power``.
    """
    mode = as_mode(mode)
    heights = sorted(check_even(t, "t") for t in t_list)
    check_replicates(replicates, 2, "ldp_check")
    if delta is None:
        from .lln import estimate_lln_gap

        delta = estimate_lln_gap(spec, [heights[-1]], replicates, mode=mode, seed=seed, threads=threads)[0].gap_hat
    if not delta > 0:
        raise PreconditionViolated(f"the deviation scale must be positive, got {delta}")
    data = endpoint_samples(spec, heights, replicates, seed, threads, cutoff_power)
    points, devs = [], {}
    for t in heights:
        g = data[(t, mode)]
        dev = np.abs(g - g.mean())
        k = int((dev > delta * t).sum())
        lo, hi = stats.wilson_interval(k, replicates, level)
        points.append(ExceedancePoint(t, delta * t, k / replicates, lo, hi, k))
        devs[t] = dev
    pos = [p for p in points if p.frequency > 0]
    envelope = stats.linear_fit([p.t ** (1 / 3) for p in pos], [math.log(p.frequency) for p in pos])
    src = EnvSource(spec, Region.cone((0, 0), (0, heights[-1])), seed, LABEL)
    return LDPResult(mode, float(delta), replicates, points, devs, envelope, src)
