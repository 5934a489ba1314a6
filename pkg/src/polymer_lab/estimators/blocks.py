"""Block decomposition of the free energy and the Lindeberg sums.

The layout places, for ``i = 1..N``, a start ``s_i = iK``, a middle
``m_i = iK + J`` and a terminal ``t_i = min(iK + 2J, n)`` height, with
``m_0 = 0`` and ``m_{N+1} = n``.  Block ``i`` is the polymer from
``(0, m_i)`` to ``(0, m_{i+1})``; consecutive blocks use disjoint rows and
are therefore independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..engine import FreeEnergyQuery, Mode, event_probability, free_energy
from ..environment import Region, WeightSpec
from ..errors import LayoutInvalid
from ..events import All, PositionIn, hits
from ..lattice import Segment
from .common import (EnvSource, Tabular, as_mode, ceil_even, check_replicates, floor_even, replicate_environment,
                     replicate_map)

DEFAULT_EPS_HWY = 1e-3


def _fourth_root_floor(x: int) -> int:
    return math.isqrt(math.isqrt(x))


@dataclass(frozen=True)
class BlockLayout:
    n: int
    J: int
    K: int

    def __post_init__(self):
        for name in ("n", "J", "K"):
            v = getattr(self, name)
            if int(v) != v or v <= 0 or v % 2:
                raise LayoutInvalid(f"{name} must be an even positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        if self.K <= 2 * self.J:
            raise LayoutInvalid(f"blocks need K > 2J, got J={self.J}, K={self.K}")
        if self.K + self.J > self.n:
            raise LayoutInvalid(f"no block fits: K + J = {self.K + self.J} exceeds n = {self.n}")

    @property
    def N(self) -> int:
        return (self.n - self.J) // self.K

    @property
    def s(self) -> np.ndarray:
        """Start heights ``s_1..s_N``."""
        return self.K * np.arange(1, self.N + 1)

    @property
    def t(self) -> np.ndarray:
        """Terminal heights ``t_1..t_N``."""
        return np.minimum(self.s + 2 * self.J, self.n)

    @property
    def m(self) -> np.ndarray:
        """Middle heights ``m_0..m_{N+1}`` including ``m_0 = 0`` and ``m_{N+1} = n``."""
        return np.concatenate([[0], self.s + self.J, [self.n]])

    @property
    def root_J(self) -> int:
        """``floor(sqrt(J))``: the constrained window and the highway start column."""
        return math.isqrt(self.J)

    @property
    def J_three_quarters(self) -> int:
        """``floor(J^(3/4))``: height of the highway wall windows."""
        return _fourth_root_floor(self.J**3)

    def block_bounds(self) -> list[tuple[int, int]]:
        m = self.m
        return [(int(m[i]), int(m[i + 1])) for i in range(self.N + 1)]


def default_layout(n: int) -> BlockLayout:
    """``J = ceil_even((log n)^2)``, ``K = ceil_even(n^0.6)``; ``J`` is lowered if needed to keep ``K > 2J``."""
    J = ceil_even(math.log(n) ** 2)
    K = ceil_even(n**0.6)
    if K <= 2 * J:
        J = max(2, floor_even((K - 1) / 2))
    return BlockLayout(n, J, K)


def lindeberg_layout(n: int, min_blocks: int = 40) -> BlockLayout:
    """Widest layout with at least ``min_blocks`` blocks.

    For nearly Gaussian blocks the truncated sum at level ``eps`` is about
    ``E[Z^2; |Z| > eps sqrt(N + 1)]``, so the block count, not the block
    size, controls it.  ``J`` is the smaller of ``ceil_even((log n)^2)`` and
    the largest even value with ``2J < K``.
    """
    J_pref = ceil_even(math.log(n) ** 2)
    for K in range(ceil_even(n**0.6), 3, -2):
        J = min(J_pref, floor_even((K - 1) / 2))
        if J < 2 or K + J > n:
            continue
        if (n - J) // K + 1 >= min_blocks:
            return BlockLayout(n, J, K)
    raise LayoutInvalid(f"n = {n} is too small for {min_blocks} blocks")


def _block_value(env, lo: int, hi: int, mode: Mode) -> float:
    if lo == hi:
        return env.weight(0, lo)
    return free_energy(FreeEnergyQuery((0, lo), (0, hi), mode), env)


# ---------------------------------------------------------------- decomposition


@dataclass(frozen=True)
class _BlockTask:
    spec: WeightSpec
    layout: BlockLayout
    seed: int
    mode: Mode

    def highway_query(self, i: int) -> FreeEnergyQuery:
        L, r = self.layout, self.layout.root_J
        return FreeEnergyQuery((r, int(L.s[i])), (r, int(L.t[i])), self.mode)

    def region(self) -> Region:
        L = self.layout
        cones = [Region.cone((0, 0), (0, L.n))]
        cones += [Region.cone(tuple(self.highway_query(i).u), tuple(self.highway_query(i).v)) for i in range(L.N)]
        return Region.union(*cones)

    def __call__(self, r: int):
        L, mode = self.layout, self.mode
        env = replicate_environment(self.spec, self.region(), self.seed, "blocks", r)
        q = FreeEnergyQuery((0, 0), (0, L.n), mode)
        g = free_energy(q, env)
        blocks = []
        bounds = L.block_bounds()
        for i, (lo, hi) in enumerate(bounds):
            v = _block_value(env, lo, hi, mode)
            if i < len(bounds) - 1:
                v -= env.weight(0, hi)
            blocks.append(v)
        w = L.J_three_quarters
        highway = []
        for i in range(L.N):
            s_i, t_i = int(L.s[i]), int(L.t[i])
            event = hits(Segment.vertical(s_i, s_i + w)) & hits(Segment.vertical(max(t_i - w, s_i), t_i))
            highway.append(event_probability(self.highway_query(i), env, event))
        window = All(tuple(PositionIn(int(h), 0, L.root_J) for i in range(L.N) for h in (L.s[i], L.t[i])))
        constrained = event_probability(q, env, window)
        return g, blocks, highway, constrained


@dataclass
class BlockResult(Tabular):
    layout: BlockLayout
    mode: Mode
    eps_hwy: float
    G: np.ndarray = field(repr=False)
    G0: np.ndarray = field(repr=False)
    highway: np.ndarray = field(repr=False)
    constrained: np.ndarray = field(repr=False)
    env_source: EnvSource | None = None

    @property
    def replicates(self) -> int:
        return self.G.size

    @property
    def discrepancy(self) -> np.ndarray:
        """``|G - sum_i G_i^0| / sqrt(n)`` per replicate."""
        return np.abs(self.G - self.G0.sum(axis=1)) / math.sqrt(self.layout.n)

    @property
    def highway_fraction(self) -> np.ndarray:
        if self.highway.shape[1] == 0:
            return np.zeros(self.replicates)
        return (self.highway >= 1 - self.eps_hwy).mean(axis=1)

    def pair_correlations(self) -> np.ndarray:
        """Correlation of ``(G_i^0, G_{i+1}^0)`` across replicates, for ``i = 0..N-1``."""
        out = []
        for i in range(self.G0.shape[1] - 1):
            a, b = self.G0[:, i], self.G0[:, i + 1]
            out.append(float(np.corrcoef(a, b)[0, 1]) if a.std() > 0 and b.std() > 0 else math.nan)
        return np.array(out)

    @property
    def adjacent_correlation(self) -> float:
        """Pooled correlation of adjacent block values.

        Each block column is standardized across replicates and the pairs
        ``(i, i+1)`` of every replicate are pooled into one sample.
        """
        sd = self.G0.std(axis=0)
        if self.G0.shape[1] < 2 or np.any(sd == 0):
            return math.nan
        z = (self.G0 - self.G0.mean(axis=0)) / sd
        a = z[:, :-1].ravel()
        b = z[:, 1:].ravel()
        return float(np.corrcoef(a, b)[0, 1])

    def summary_rows(self):
        L = self.layout
        return [{"n": L.n, "J": L.J, "K": L.K, "N": L.N, "mode": self.mode.value, "replicates": self.replicates,
                 "mean_discrepancy": float(self.discrepancy.mean()), "max_discrepancy": float(self.discrepancy.max()),
                 "mean_highway_fraction": float(self.highway_fraction.mean()),
                 "mean_constrained_prob": float(self.constrained.mean()),
                 "adjacent_correlation": self.adjacent_correlation, "eps_hwy": self.eps_hwy}]

    def replicate_rows(self):
        rows = []
        disc, frac = self.discrepancy, self.highway_fraction
        for r in range(self.replicates):
            rows.append({"replicate": r, "G": float(self.G[r]), "sum_G0": float(self.G0[r].sum()),
                         "discrepancy": float(disc[r]), "highway_fraction": float(frac[r]),
                         "constrained_prob": float(self.constrained[r])})
        return rows


def block_decomposition(spec: WeightSpec, n: int, J: int | None, K: int | None, replicates: int,
                        mode=Mode.POSITIVE, seed: int = 0, threads: int | None = None,
                        eps_hwy: float = DEFAULT_EPS_HWY) -> BlockResult:
    """Compare ``G(0,0; 0,n)`` with the sum of its block values ``G_i^0``.

    Also reports, per replicate, the fraction of blocks whose polymer from
    ``(sqrt J, s_i)`` to ``(sqrt J, t_i)`` is a local highway with
    probability at least ``1 - eps_hwy`` (it touches the wall within
    ``J^(3/4)`` of both ends), and the probability that the long polymer
    passes within ``sqrt J`` of the wall at every ``s_i`` and ``t_i``.
    ``J`` and ``K`` default to :func:`default_layout`.
    """
    mode = as_mode(mode)
    check_replicates(replicates, 1, "block_decomposition")
    layout = default_layout(n) if J is None and K is None else BlockLayout(n, J, K)
    task = _BlockTask(spec, layout, int(seed), mode)
    results = replicate_map(task, replicates, threads)
    G = np.array([r[0] for r in results])
    G0 = np.array([r[1] for r in results]).reshape(replicates, layout.N + 1)
    hw = np.array([r[2] for r in results], dtype=np.float64).reshape(replicates, layout.N)
    cons = np.array([r[3] for r in results])
    return BlockResult(layout, mode, eps_hwy, G, G0, hw, cons, EnvSource(spec, task.region(), seed, "blocks"))


# ---------------------------------------------------------------- Lindeberg


@dataclass(frozen=True)
class _LindebergTask:
    spec: WeightSpec
    layout: BlockLayout
    seed: int
    mode: Mode

    def region(self) -> Region:
        return Region.union(*(Region.cone((0, lo), (0, hi)) for lo, hi in self.layout.block_bounds()))

    def __call__(self, r: int) -> list[float]:
        env = replicate_environment(self.spec, self.region(), self.seed, "lindeberg", r)
        return [_block_value(env, lo, hi, self.mode) for lo, hi in self.layout.block_bounds()]


@dataclass
class LindebergResult(Tabular):
    layout: BlockLayout
    mode: Mode
    epsilons: np.ndarray
    sums: np.ndarray
    block_values: np.ndarray = field(repr=False)
    sigma: float
    env_source: EnvSource | None = None

    def sum_at(self, eps: float) -> float:
        i = int(np.nonzero(np.isclose(self.epsilons, eps))[0][0])
        return float(self.sums[i])

    def summary_rows(self):
        L = self.layout
        return [{"n": L.n, "J": L.J, "K": L.K, "N": L.N, "mode": self.mode.value,
                 "replicates": self.block_values.shape[0], "epsilon": float(e), "lindeberg_sum": float(s),
                 "sigma_N": self.sigma} for e, s in zip(self.epsilons, self.sums)]

    def replicate_rows(self):
        return [{"replicate": r, "block": i, "G_block": float(v)}
                for r, row in enumerate(self.block_values) for i, v in enumerate(row)]


def lindeberg_sum(spec: WeightSpec, n: int, epsilon_list: Sequence[float], replicates: int,
                  mode=Mode.POSITIVE, seed: int = 0, threads: int | None = None, J: int | None = None,
                  K: int | None = None, min_blocks: int = 40) -> LindebergResult:
    """``sum_i E[X_i^2; |X_i| > eps]`` for the standardized block free energies.

    ``X_i = (G_i - mean_i) / sqrt(sum_j Var_j)`` with empirical means and
    (population) variances, so the sum at ``eps = 0`` is 1 by construction.
    ``sigma`` reports the implied ``sigma_N = sqrt(sum_j Var_j / (N K))``.
    """
    mode = as_mode(mode)
    check_replicates(replicates, 2, "lindeberg_sum")
    layout = lindeberg_layout(n, min_blocks) if J is None and K is None else BlockLayout(n, J, K)
    task = _LindebergTask(spec, layout, int(seed), mode)
    values = np.array(replicate_map(task, replicates, threads), dtype=np.float64).reshape(replicates, layout.N + 1)
    centered = values - values.mean(axis=0)
    total_var = float((centered**2).mean(axis=0).sum())
    eps = np.asarray(epsilon_list, dtype=np.float64)
    if total_var > 0:
        X = centered / math.sqrt(total_var)
        sums = np.array([float((X**2 * (np.abs(X) > e)).mean(axis=0).sum()) for e in eps])
    else:
        sums = np.zeros(eps.size)
    sigma = math.sqrt(total_var / (layout.N * layout.K))
    return LindebergResult(layout, mode, eps, sums, values, sigma, EnvSource(spec, task.region(), seed, "lindeberg"))
