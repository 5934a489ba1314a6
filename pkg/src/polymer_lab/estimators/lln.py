"""Paired comparisons against the bulk model and near-vertical endpoints.

Every comparison here is evaluated on one environment per replicate:
the original field against its bulk view (same bulk weights, redrawn
wall), the excursion free energy against its shifted bulk counterpart,
and ``G(0,0; 0,n)`` against ``G(0,0; y_n,n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..engine import FreeEnergyQuery, Geometry, Mode, free_energy
from ..environment import Region, ShiftedView, WeightSpec, bulk_view
from ..errors import PreconditionViolated
from ..events import Mask
from . import stats
from .common import (EnvSource, Tabular, as_mode, aux_seed, check_even, check_replicates, floor_even,
                     replicate_environment, replicate_map)

GAP_DIVISOR = 5.0


# ---------------------------------------------------------------- LLN gap


@dataclass(frozen=True)
class LLNEstimate:
    n: int
    g_hat: float
    g_bulk_hat: float
    gap_hat: float
    std_errors: dict
    replicates: int
    diff_hat: float
    gap_ci: tuple[float, float]

    def __post_init__(self):
        if any(v < 0 for v in self.std_errors.values()):
            raise ValueError("standard errors must be nonnegative")


@dataclass(frozen=True)
class _LLNTask:
    spec: WeightSpec
    heights: tuple[int, ...]
    seed: int
    mode: Mode
    geometry: Geometry

    def __call__(self, r: int) -> list[tuple[float, float]]:
        full = self.geometry is Geometry.FULL
        region = Region.cone((0, 0), (0, max(self.heights)), full_space=full)
        env = replicate_environment(self.spec, region, self.seed, "lln", r)
        bulk = bulk_view(env, aux_seed(self.seed, "lln", r))
        out = []
        for n in self.heights:
            g = free_energy(FreeEnergyQuery((0, 0), (0, n), self.mode), env)
            gb = free_energy(FreeEnergyQuery((0, 0), (0, n), self.mode, self.geometry), bulk)
            out.append((g, gb))
        return out


@dataclass
class LLNCurve(Tabular):
    """Gap estimates per ``n``; indexes and iterates like a list of them."""

    mode: Mode
    geometry: Geometry
    estimates: list[LLNEstimate]
    samples: dict[int, np.ndarray] = field(repr=False)
    env_source: EnvSource | None = None

    def __getitem__(self, i):
        return self.estimates[i]

    def __len__(self):
        return len(self.estimates)

    def __iter__(self):
        return iter(self.estimates)

    def summary_rows(self):
        return [{"n": e.n, "mode": self.mode.value, "geometry": self.geometry.value, "replicates": e.replicates,
                 "g_hat": e.g_hat, "g_bulk_hat": e.g_bulk_hat, "diff_hat": e.diff_hat, "gap_hat": e.gap_hat,
                 "se_g": e.std_errors["g"], "se_g_bulk": e.std_errors["g_bulk"], "se_gap": e.std_errors["gap"],
                 "gap_ci_low": e.gap_ci[0], "gap_ci_high": e.gap_ci[1]} for e in self.estimates]

    def replicate_rows(self):
        rows = []
        reps = self.estimates[0].replicates if self.estimates else 0
        for r in range(reps):
            for e in self.estimates:
                g, gb = self.samples[e.n][r]
                rows.append({"replicate": r, "n": e.n, "G": float(g), "G_bulk": float(gb)})
        return rows


def estimate_lln_gap(spec: WeightSpec, n_list: Sequence[int], replicates: int, geometry=Geometry.HALF,
                     mode=Mode.POSITIVE, seed: int = 0, threads: int | None = None,
                     level: float = 0.95) -> LLNCurve:
    """Paired estimates of ``g``, ``g_bulk`` and the gap ``(g - g_bulk) / 5``.

    ``geometry`` selects the path set of the bulk-side free energy; the
    original model is always the half-space one.
    """
    mode = as_mode(mode)
    geometry = Geometry(geometry)
    check_replicates(replicates, 2, "estimate_lln_gap")
    heights = tuple(check_even(n) for n in n_list)
    task = _LLNTask(spec, tuple(sorted(set(heights))), int(seed), mode, geometry)
    results = replicate_map(task, replicates, threads)
    index = {n: i for i, n in enumerate(task.heights)}
    estimates, samples = [], {}
    for n in heights:
        pairs = np.array([res[index[n]] for res in results])
        g, gb = pairs[:, 0] / n, pairs[:, 1] / n
        g_hat, g_se = stats.mean_and_se(g)
        gb_hat, gb_se = stats.mean_and_se(gb)
        d = (g - gb) / GAP_DIVISOR
        _, d_se = stats.mean_and_se(d)
        gap_hat = (g_hat - gb_hat) / GAP_DIVISOR
        q = stats.t_interval(d, level)
        half = (q[1] - q[0]) / 2
        estimates.append(LLNEstimate(n, g_hat, gb_hat, gap_hat, {"g": g_se, "g_bulk": gb_se, "gap": d_se},
                                     replicates, g_hat - gb_hat, (float(gap_hat - half), float(gap_hat + half))))
        samples[n] = pairs
    src = EnvSource(spec, Region.cone((0, 0), (0, max(heights)), full_space=geometry is Geometry.FULL),
                    seed, "lln")
    return LLNCurve(mode, geometry, estimates, samples, src)


# ---------------------------------------------------------------- excursion identity


IDENTITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class _ExcursionTask:
    spec: WeightSpec
    n: int
    seed: int
    mode: Mode

    def __call__(self, r: int) -> tuple[float, float, float]:
        n = self.n
        cone = Region.cone((0, 0), (0, n))
        env = replicate_environment(self.spec, cone, self.seed, "excursion", r)
        exc = FreeEnergyQuery((0, 0), (0, n), self.mode, mask=Mask.excursion((0, 0), (0, n)))
        left = free_energy(exc, env)
        inner = FreeEnergyQuery((0, 0), (0, n - 2), self.mode)
        shifted = free_energy(inner, ShiftedView(env, 1, 1)) + env.weight(0, 0) + env.weight(0, n)
        other = replicate_environment(self.spec, Region.cone((0, 0), (0, n - 2)), self.seed, "excursion-bulk", r)
        right = free_energy(inner, bulk_view(other, aux_seed(self.seed, "excursion-bulk", r)))
        right += other.weight(0, 0) + other.weight(0, 1)
        return left, shifted, right


@dataclass
class ExcursionResult(Tabular):
    n: int
    mode: Mode
    excursion: np.ndarray = field(repr=False)
    shifted: np.ndarray = field(repr=False)
    bulk_side: np.ndarray = field(repr=False)
    ks: stats.TwoSampleKS
    env_source: EnvSource | None = None

    @property
    def identity_error(self) -> float:
        """Worst relative gap between the masked excursion value and the shifted bulk formula."""
        scale = np.maximum(1.0, np.abs(self.excursion))
        return float(np.max(np.abs(self.excursion - self.shifted) / scale)) if self.excursion.size else 0.0

    @property
    def identity_holds(self) -> bool:
        return self.identity_error <= IDENTITY_TOLERANCE

    def summary_rows(self):
        return [{"n": self.n, "mode": self.mode.value, "replicates": int(self.excursion.size),
                 "mean_excursion": float(self.excursion.mean()), "mean_bulk_side": float(self.bulk_side.mean()),
                 "ks_statistic": self.ks.statistic, "ks_critical": self.ks.critical, "ks_pvalue": self.ks.pvalue,
                 "identity_max_rel_error": self.identity_error}]

    def replicate_rows(self):
        return [{"replicate": r, "G_excursion": float(a), "G_shifted": float(b), "G_bulk_side": float(c)}
                for r, (a, b, c) in enumerate(zip(self.excursion, self.shifted, self.bulk_side))]


def excursion_identity_check(spec: WeightSpec, n: int, replicates: int, mode=Mode.POSITIVE, seed: int = 0,
                             threads: int | None = None, alpha: float = 0.01) -> ExcursionResult:
    """Compare ``G_exc(0,0; 0,n)`` with ``G_bulk(0,0; 0,n-2)`` plus two wall weights.

    The two sides use independent environments; the per-environment
    bijection (strip the endpoints, shift by ``(1, 1)``) is checked as well.
    """
    mode = as_mode(mode)
    n = check_even(n, minimum=4)
    check_replicates(replicates, 2, "excursion_identity_check")
    out = np.array(replicate_map(_ExcursionTask(spec, n, int(seed), mode), replicates, threads))
    ks = stats.two_sample_ks(out[:, 0], out[:, 2], alpha)
    src = EnvSource(spec, Region.cone((0, 0), (0, n)), seed, "excursion")
    return ExcursionResult(n, mode, out[:, 0], out[:, 1], out[:, 2], ks, src)


# ---------------------------------------------------------------- near-vertical endpoints


YRule = Callable[[int], int] | Mapping[int, int] | int


def power_rule(exponent: float, scale: float = 1.0) -> Callable[[int], int]:
    """``n -> floor_even(scale * n ** exponent)``."""

    def rule(n: int) -> int:
        return floor_even(scale * n ** exponent)

    rule.__name__ = f"floor_even({scale}*n^{exponent})"
    return rule


def resolve_y(rule: YRule, n: int) -> int:
    if isinstance(rule, Mapping):
        y = rule[n]
    elif callable(rule):
        y = rule(n)
    else:
        y = rule
    y = int(y)
    if y < 0 or y % 2 or y > n:
        raise PreconditionViolated(f"endpoint offset y_n={y} must be even and within [0, {n}]")
    return y


@dataclass(frozen=True)
class _NearVerticalTask:
    spec: WeightSpec
    pairs: tuple[tuple[int, int], ...]
    seed: int
    mode: Mode

    def region(self) -> Region:
        cones = [Region.cone((0, 0), (0, n)) for n, _ in self.pairs]
        cones += [Region.cone((0, 0), (y, n)) for n, y in self.pairs]
        return Region.union(*cones)

    def __call__(self, r: int) -> list[float]:
        env = replicate_environment(self.spec, self.region(), self.seed, "near-vertical", r)
        out = []
        for n, y in self.pairs:
            a = free_energy(FreeEnergyQuery((0, 0), (0, n), self.mode), env)
            b = free_energy(FreeEnergyQuery((0, 0), (y, n), self.mode), env)
            out.append(abs(a - b) / math.sqrt(n))
        return out


@dataclass(frozen=True)
class NearVerticalPoint:
    n: int
    y: int
    mean: float
    se: float
    p95: float


@dataclass
class NearVerticalResult(Tabular):
    mode: Mode
    replicates: int
    points: list[NearVerticalPoint]
    samples: np.ndarray = field(repr=False)
    env_source: EnvSource | None = None

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.points])

    @property
    def strictly_decreasing(self) -> bool:
        m = self.means
        return bool(np.all(np.diff(m) < 0))

    def summary_rows(self):
        return [{"n": p.n, "y": p.y, "mode": self.mode.value, "replicates": self.replicates, "mean": p.mean,
                 "se": p.se, "p95": p.p95} for p in self.points]

    def replicate_rows(self):
        return [{"replicate": r, "n": p.n, "y": p.y, "statistic": float(self.samples[r, i])}
                for r in range(self.replicates) for i, p in enumerate(self.points)]


def near_vertical_gap(spec: WeightSpec, n_list: Sequence[int], y_rule: YRule, replicates: int,
                      mode=Mode.POSITIVE, seed: int = 0, threads: int | None = None) -> NearVerticalResult:
    """Per-``n`` sample of ``|G(0,0; 0,n) - G(0,0; y_n,n)| / sqrt(n)`` on shared environments."""
    mode = as_mode(mode)
    check_replicates(replicates, 2, "near_vertical_gap")
    pairs = tuple((check_even(n), resolve_y(y_rule, int(n))) for n in n_list)
    task = _NearVerticalTask(spec, pairs, int(seed), mode)
    samples = np.array(replicate_map(task, replicates, threads), dtype=np.float64).reshape(replicates, len(pairs))
    points = []
    for i, (n, y) in enumerate(pairs):
        m, se = stats.mean_and_se(samples[:, i])
        points.append(NearVerticalPoint(n, y, m, se, float(np.quantile(samples[:, i], 0.95))))
    return NearVerticalResult(mode, replicates, points, samples, EnvSource(spec, task.region(), seed, "near-vertical"))
