"""Coalescence of coupled polymers over random environments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import Mode
from ..environment import Region, WeightSpec
from ..lattice import Point, as_point, feasible
from ..sampling import CoupledPair, coalescence_summary, coupled_pair, rng_stream
from .common import EnvSource, Tabular, as_mode, check_replicates, replicate_environment, replicate_map

LABEL = "couple-demo"


def _region(u: Point, v: Point, u2: Point, v2: Point) -> Region:
    cones = [Region.cone(u, v), Region.cone(u2, v2)]
    if feasible(u2, v):
        cones.append(Region.cone(u2, v))
    return Region.union(*cones)


@dataclass(frozen=True)
class _CoupleTask:
    spec: WeightSpec
    endpoints: tuple[Point, Point, Point, Point]
    seed: int
    mode: Mode

    def __call__(self, r: int) -> dict:
        u, v, u2, v2 = self.endpoints
        env = replicate_environment(self.spec, _region(u, v, u2, v2), self.seed, LABEL, r)
        pair: CoupledPair = coupled_pair(u, v, u2, v2, env, rng_stream(self.seed, LABEL, r), self.mode)
        c = coalescence_summary(pair)
        lo, hi = c.overlap_interval if c.overlap_interval else (-1, -1)
        return {"replicate": r, "ordered": int(pair.ordered()), "connected": int(c.connected),
                "overlap_length": c.overlap_length, "overlap_low": lo, "overlap_high": hi,
                "left": pair.left.run_length(), "right": pair.right.run_length()}


@dataclass
class CouplingDemo(Tabular):
    mode: Mode
    endpoints: tuple[Point, Point, Point, Point]
    rows: list[dict] = field(repr=False)
    env_source: EnvSource | None = None

    @property
    def ordered_fraction(self) -> float:
        return float(np.mean([r["ordered"] for r in self.rows]))

    @property
    def connected_fraction(self) -> float:
        return float(np.mean([r["connected"] for r in self.rows]))

    @property
    def overlap_lengths(self) -> np.ndarray:
        return np.array([r["overlap_length"] for r in self.rows])

    def summary_rows(self):
        u, v, u2, v2 = self.endpoints
        lengths = self.overlap_lengths
        return [{"mode": self.mode.value, "u": f"{u.x}:{u.t}", "v": f"{v.x}:{v.t}", "u2": f"{u2.x}:{u2.t}",
                 "v2": f"{v2.x}:{v2.t}", "replicates": len(self.rows), "ordered_fraction": self.ordered_fraction,
                 "connected_fraction": self.connected_fraction, "mean_overlap": float(lengths.mean()),
                 "meet_fraction": float((lengths > 0).mean())}]

    def replicate_rows(self):
        return list(self.rows)


def couple_demo(spec: WeightSpec, u, v, u2, v2, replicates: int, mode=Mode.POSITIVE, seed: int = 0,
                threads: int | None = None) -> CouplingDemo:
    """One coupled pair per environment, with its shared heights and both paths in run-length form."""
    mode = as_mode(mode)
    check_replicates(replicates, 1, "couple_demo")
    ends = tuple(as_point(p) for p in (u, v, u2, v2))
    rows = replicate_map(_CoupleTask(spec, ends, int(seed), mode), replicates, threads)
    return CouplingDemo(mode, ends, rows, EnvSource(spec, _region(*ends), seed, LABEL))
