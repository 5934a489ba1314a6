"""Replicate seeding, parallel execution and tabular result plumbing."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import keyed
from ..engine import Mode
from ..environment import Field, Region, WeightSpec, sample_environment
from ..errors import PreconditionViolated

THREADS_ENV = "POLYMER_LAB_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``POLYMER_LAB_THREADS``, else the CPU count."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if raw:
            try:
                threads = int(raw)
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    return int(threads)


def replicate_map(fn: Callable[[int], object], replicates: int | Sequence[int],
                  threads: int | None = None) -> list:
    """``[fn(r) for r in indices]``, possibly evaluated in worker processes.

    ``replicates`` is a count (indices ``0..count-1``) or explicit indices.
    Each replicate derives its randomness from its index alone, and results
    come back in index order, so the output does not depend on the worker
    count.  ``fn`` must be picklable when more than one worker is used.
    """
    indices = list(range(replicates)) if isinstance(replicates, int) else [int(r) for r in replicates]
    workers = min(resolve_threads(threads), max(len(indices), 1))
    if workers == 1:
        return [fn(r) for r in indices]
    chunk = max(1, len(indices) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices, chunksize=chunk))


def env_seed(seed: int, label: str, replicate: int) -> int:
    return keyed.derive_seed(seed, label, replicate)


def aux_seed(seed: int, label: str, replicate: int) -> int:
    """Seed for auxiliary redraws (bulk columns, resampled rows) of a replicate."""
    return keyed.derive_seed(seed, label, replicate, "aux")


def replicate_environment(spec: WeightSpec, region: Region, seed: int, label: str, replicate: int) -> Field:
    return sample_environment(spec, region, env_seed(seed, label, replicate))


@dataclass(frozen=True)
class EnvSource:
    """How the primary environment of every replicate was generated."""

    spec: WeightSpec
    region: Region
    seed: int
    label: str

    def environment(self, replicate: int) -> Field:
        return replicate_environment(self.spec, self.region, self.seed, self.label, replicate)


class Tabular:
    """Results that can be flattened to summary and per-replicate rows."""

    env_source: EnvSource | None = None

    def summary_rows(self) -> list[dict]:
        raise NotImplementedError

    def replicate_rows(self) -> list[dict]:
        raise NotImplementedError

    def summary_lines(self) -> list[str]:
        """One human-readable line per summary row."""
        return [format_row(row) for row in self.summary_rows()]


def format_row(row: dict) -> str:
    def fmt(value) -> str:
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)

    return " ".join(f"{k}={fmt(v)}" for k, v in row.items())


def check_replicates(replicates: int, minimum: int, what: str) -> int:
    replicates = int(replicates)
    if replicates < minimum:
        raise PreconditionViolated(f"{what} needs at least {minimum} replicates, got {replicates}")
    return replicates


def check_even(n: int, name: str = "n", minimum: int = 2) -> int:
    n = int(n)
    if n < minimum or n % 2:
        raise PreconditionViolated(f"{name} must be an even integer >= {minimum}, got {n}")
    return n


def as_mode(mode) -> Mode:
    return Mode(mode)


def floor_even(x: float) -> int:
    return 2 * int(math.floor(x / 2))


def ceil_even(x: float) -> int:
    return 2 * int(math.ceil(x / 2))


def quantile(values: Sequence[float], q: float) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float(np.quantile(v, q)) if v.size else math.nan
