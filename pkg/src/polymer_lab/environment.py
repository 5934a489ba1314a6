"""Weight laws and seeded realizations of the random environment.

A realized environment assigns a positive weight to every lattice point of
a bounded region.  Weights come from :mod:`polymer_lab.keyed`, so a point's
weight depends only on ``(seed, x, t)``: regenerating, enlarging the region
or generating rows in another order reproduces every existing weight bit
for bit.  Column ``x = 0`` draws from the vertical law, every other column
from the bulk law.

Sampling algorithms are part of the reproducibility contract:

* ``Exponential(rate)``: ``-log(U) / rate``.
* ``Gamma(shape, rate)``: Marsaglia-Tsang squeeze/rejection with
  Box-Muller normals.  Attempt ``a`` of a point consumes the keyed
  uniforms ``k = 3a, 3a + 1, 3a + 2`` (two for the normal, one for the
  acceptance test).  For ``shape < 1`` a ``Gamma(shape + 1)`` draw is
  multiplied by ``V ** (1 / shape)`` with ``V`` taken at ``k = -1``.
* ``Constant(value)``: the value itself.

Derived fields (bulk view, truncation, row perturbation, row resampling,
shifts) are thin views over a base field; :meth:`Field.materialize` turns
any of them into a dense :class:`Environment`.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import keyed
from .errors import InadmissibleSpec, InvalidSpec, OutOfRegion

_BULK_STREAM = keyed.label_to_int("bulk-view")
_RESAMPLE_STREAM = keyed.label_to_int("row-resample")


# ---------------------------------------------------------------- laws


class Distribution:
    """A positive weight law with a pinned, vectorized keyed sampler."""

    family: str = ""
    degenerate = False

    def sample(self, key: int, xs: np.ndarray, t) -> np.ndarray:
        """Draws at ``(xs, t)``; ``t`` is one height or an array matching ``xs``."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: Mapping) -> "Distribution":
        d = dict(d)
        family = str(d.pop("family", "")).lower()
        try:
            if family == "exponential":
                return Exponential(**d)
            if family == "gamma":
                return Gamma(**d)
            if family == "constant":
                return Constant(**d)
        except TypeError as exc:
            raise InvalidSpec(f"bad parameters for {family}: {exc}") from None
        raise InvalidSpec(f"unknown distribution family {family!r}")


def _check_positive(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidSpec(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise InvalidSpec(f"{name} must be strictly positive and finite, got {value}")
    return value


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0
    family = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _check_positive("rate", self.rate))

    def sample(self, key, xs, t):
        return -np.log(keyed.uniforms(key, xs, t)) / self.rate

    @property
    def mean(self):
        return 1.0 / self.rate

    def to_dict(self):
        return {"family": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float = 1.0
    rate: float = 1.0
    family = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _check_positive("shape", self.shape))
        object.__setattr__(self, "rate", _check_positive("rate", self.rate))

    def sample(self, key, xs, t):
        xs = np.asarray(xs, dtype=np.int64)
        a = self.shape if self.shape >= 1 else self.shape + 1.0
        d = a - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        ts = np.broadcast_to(np.asarray(t, dtype=np.int64), xs.shape)
        out = np.empty(xs.shape, dtype=np.float64)
        pending = np.arange(xs.size)
        attempt = 0
        while pending.size:
            px, pt = xs[pending], ts[pending]
            u1 = keyed.uniforms(key, px, pt, 3 * attempt)
            u2 = keyed.uniforms(key, px, pt, 3 * attempt + 1)
            u3 = keyed.uniforms(key, px, pt, 3 * attempt + 2)
            z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
            v = (1.0 + c * z) ** 3
            ok = v > 0
            with np.errstate(invalid="ignore", divide="ignore"):
                ok &= np.log(u3) < 0.5 * z * z + d - d * v + d * np.log(np.where(ok, v, 1.0))
            out[pending[ok]] = d * v[ok]
            pending = pending[~ok]
            attempt += 1
        if self.shape < 1:
            out *= keyed.uniforms(key, xs, t, -1) ** (1.0 / self.shape)
        return out / self.rate

    @property
    def mean(self):
        return self.shape / self.rate

    def to_dict(self):
        return {"family": "gamma", "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class Constant(Distribution):
    """Degenerate law for closed-form diagnostics only."""

    value: float = 1.0
    family = "constant"
    degenerate = True

    def __post_init__(self):
        object.__setattr__(self, "value", _check_positive("value", self.value))

    def sample(self, key, xs, t):
        return np.full(np.shape(xs), self.value, dtype=np.float64)

    @property
    def mean(self):
        return self.value

    def to_dict(self):
        return {"family": "constant", "value": self.value}


@dataclass(frozen=True)
class WeightSpec:
    """Bulk law (``x > 0``) and vertical law (``x = 0``)."""

    bulk: Distribution
    vertical: Distribution

    @classmethod
    def iid(cls, law: Distribution) -> "WeightSpec":
        return cls(law, law)

    @classmethod
    def from_dict(cls, d: Mapping) -> "WeightSpec":
        if not isinstance(d, Mapping) or set(d) != {"bulk", "vertical"}:
            raise InvalidSpec("a weight spec needs exactly the keys 'bulk' and 'vertical'")
        return cls(Distribution.from_dict(d["bulk"]), Distribution.from_dict(d["vertical"]))

    def to_dict(self) -> dict:
        return {"bulk": self.bulk.to_dict(), "vertical": self.vertical.to_dict()}

    @property
    def degenerate(self) -> bool:
        return self.bulk.degenerate or self.vertical.degenerate

    def require_unbounded(self, what: str = "this experiment") -> None:
        if self.degenerate:
            raise InadmissibleSpec(f"{what} needs weight laws with unbounded support; got {self.to_dict()}")

    def law_at(self, x: int) -> Distribution:
        return self.vertical if x == 0 else self.bulk

    def sample_row(self, key: int, t: int, lo: int, hi: int) -> np.ndarray:
        """Weights at ``x = lo..hi`` on row ``t`` (column 0 from the vertical law)."""
        xs = np.arange(lo, hi + 1, dtype=np.int64)
        out = self.bulk.sample(key, xs, t)
        if lo <= 0 <= hi:
            out[-lo] = self.vertical.sample(key, xs[-lo:-lo + 1], t)[0]
        return out

    def sample_points(self, key: int, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
        """Weights at arbitrary points, identical to the row-wise draws."""
        out = self.bulk.sample(key, xs, ts)
        wall = np.nonzero(xs == 0)[0]
        if wall.size:
            out[wall] = self.vertical.sample(key, xs[wall], ts[wall])
        return out


BOUND_PHASE = WeightSpec(Exponential(1.0), Exponential(0.25))
CONTROL = WeightSpec(Exponential(1.0), Exponential(1.0))


# ---------------------------------------------------------------- regions


class Region:
    """A finite set of lattice points given by per-row column ranges.

    Row ``t`` (for ``t_min <= t <= t_max``) holds the points
    ``x = lo[t - t_min] .. hi[t - t_min]``; an empty row has ``lo > hi``.
    Negative columns are allowed so full-space queries can be served.
    """

    def __init__(self, t_min: int, lo: Iterable[int], hi: Iterable[int]):
        self.t_min = int(t_min)
        self.lo = np.asarray(list(lo) if not isinstance(lo, np.ndarray) else lo, dtype=np.int64)
        self.hi = np.asarray(list(hi) if not isinstance(hi, np.ndarray) else hi, dtype=np.int64)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1 or self.lo.size == 0:
            raise ValueError("region needs matching, nonempty per-row bounds")
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    @property
    def t_max(self) -> int:
        return self.t_min + self.lo.size - 1

    @property
    def x_min(self) -> int:
        ok = self.lo <= self.hi
        return int(self.lo[ok].min())

    @property
    def x_max(self) -> int:
        ok = self.lo <= self.hi
        return int(self.hi[ok].max())

    @classmethod
    def rectangle(cls, t_min: int, t_max: int, x_max: int, x_min: int = 0) -> "Region":
        rows = t_max - t_min + 1
        return cls(t_min, np.full(rows, x_min), np.full(rows, x_max))

    @classmethod
    def cone(cls, u, v, full_space: bool = False) -> "Region":
        """Every point lying on some path from ``u`` to ``v``."""
        (x1, t1), (x2, t2) = u, v
        ts = np.arange(t1, t2 + 1)
        lo = np.maximum(x1 - (ts - t1), x2 - (t2 - ts))
        hi = np.minimum(x1 + (ts - t1), x2 + (t2 - ts))
        if not full_space:
            lo = np.maximum(lo, 0)
        return cls(t1, lo, hi)

    @classmethod
    def forward_cone(cls, u, height: int, full_space: bool = False) -> "Region":
        """Every point reachable from ``u`` up to ``height`` (point-to-line)."""
        x1, t1 = u
        ts = np.arange(t1, height + 1)
        lo = x1 - (ts - t1)
        if not full_space:
            lo = np.maximum(lo, 0)
        return cls(t1, lo, x1 + (ts - t1))

    @classmethod
    def union(cls, *regions: "Region") -> "Region":
        t_min = min(r.t_min for r in regions)
        t_max = max(r.t_max for r in regions)
        rows = t_max - t_min + 1
        lo = np.full(rows, np.iinfo(np.int64).max // 4)
        hi = np.full(rows, np.iinfo(np.int64).min // 4)
        for r in regions:
            s = r.t_min - t_min
            ok = r.lo <= r.hi
            seg_lo = np.where(ok, r.lo, lo[s:s + r.lo.size])
            seg_hi = np.where(ok, r.hi, hi[s:s + r.hi.size])
            lo[s:s + r.lo.size] = np.minimum(lo[s:s + r.lo.size], seg_lo)
            hi[s:s + r.hi.size] = np.maximum(hi[s:s + r.hi.size], seg_hi)
        return cls(t_min, lo, hi)

    def bounds(self, t: int) -> tuple[int, int]:
        if not self.t_min <= t <= self.t_max:
            return 1, 0
        i = t - self.t_min
        return int(self.lo[i]), int(self.hi[i])

    def contains(self, x: int, t: int) -> bool:
        lo, hi = self.bounds(t)
        return lo <= x <= hi

    def covers(self, t_min: int, lo: np.ndarray, hi: np.ndarray) -> bool:
        """True iff every nonempty row range ``[lo[i], hi[i]]`` at ``t_min + i`` is inside."""
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        need = lo <= hi
        if not need.any():
            return True
        ts = t_min + np.nonzero(need)[0]
        if ts.min() < self.t_min or ts.max() > self.t_max:
            return False
        idx = ts - self.t_min
        return bool(np.all(self.lo[idx] <= lo[need]) and np.all(self.hi[idx] >= hi[need]))

    def num_points(self) -> int:
        return int(np.clip(self.hi - self.lo + 1, 0, None).sum())

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def __eq__(self, other):
        return (
            isinstance(other, Region)
            and self.t_min == other.t_min
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __repr__(self):
        return f"Region(t={self.t_min}..{self.t_max}, x={self.x_min}..{self.x_max}, points={self.num_points()})"


# ---------------------------------------------------------------- fields


class Field:
    """Anything that can hand out rows of weights over a region."""

    region: Region
    spec: WeightSpec | None
    seed: int | None

    def row(self, t: int, lo: int, hi: int) -> np.ndarray:
        """Weights at ``x = lo..hi`` on row ``t``; the caller checks coverage."""
        raise NotImplementedError

    def contains(self, x: int, t: int) -> bool:
        return self.region.contains(x, t)

    def weight(self, x: int, t: int) -> float:
        if not self.contains(x, t):
            raise OutOfRegion(f"no realized weight at ({x}, {t})")
        return float(self.row(t, x, x)[0])

    def materialize(self) -> "Environment":
        reg = self.region
        x0 = reg.x_min
        dense = np.full((reg.lo.size, reg.x_max - x0 + 1), np.nan)
        for i in range(reg.lo.size):
            lo, hi = int(reg.lo[i]), int(reg.hi[i])
            if lo <= hi:
                dense[i, lo - x0:hi - x0 + 1] = self.row(reg.t_min + i, lo, hi)
        return Environment(reg, dense, x0, spec=self.spec, seed=self.seed)


class Environment(Field):
    """A dense realized field.  Entries outside the region hold NaN."""

    def __init__(self, region: Region, dense: np.ndarray, x0: int, spec: WeightSpec | None = None,
                 seed: int | None = None):
        self.region = region
        self._dense = dense
        self._x0 = int(x0)
        self.spec = spec
        self.seed = seed
        dense.setflags(write=False)

    @property
    def dense(self) -> np.ndarray:
        return self._dense

    def row(self, t, lo, hi):
        i = t - self.region.t_min
        return self._dense[i, lo - self._x0:hi - self._x0 + 1]

    def weight(self, x, t):
        if not self.contains(x, t):
            raise OutOfRegion(f"no realized weight at ({x}, {t})")
        return float(self._dense[t - self.region.t_min, x - self._x0])

    def materialize(self):
        return self

    def values(self) -> np.ndarray:
        """Every realized weight, row-major, without the padding."""
        return self._dense[~np.isnan(self._dense)]

    def with_weights(self, updates: Mapping[tuple[int, int], float]) -> "Environment":
        """Copy with selected weights replaced (test fixtures, counterexamples)."""
        dense = self._dense.copy()
        for (x, t), w in updates.items():
            if not self.contains(x, t):
                raise OutOfRegion(f"({x}, {t}) is outside the region")
            if not w > 0:
                raise ValueError("weights must be positive")
            dense[t - self.region.t_min, x - self._x0] = float(w)
        return Environment(self.region, dense, self._x0, spec=None, seed=self.seed)

    @classmethod
    def constant(cls, value: float, region: Region) -> "Environment":
        spec = WeightSpec.iid(Constant(value))
        return sample_environment(spec, region, 0)

    @classmethod
    def from_function(cls, fn, region: Region) -> "Environment":
        """Dense field with weight ``fn(x, t)`` at every region point."""
        x0 = region.x_min
        dense = np.full((region.lo.size, region.x_max - x0 + 1), np.nan)
        for i in range(region.lo.size):
            t = region.t_min + i
            for x in range(int(region.lo[i]), int(region.hi[i]) + 1):
                w = float(fn(x, t))
                if not w > 0:
                    raise ValueError("weights must be positive")
                dense[i, x - x0] = w
        return cls(region, dense, x0)


class LazyEnvironment(Field):
    """Generates rows on demand; O(width) memory for very long polymers."""

    def __init__(self, spec: WeightSpec, region: Region, seed: int):
        self.spec = spec
        self.region = region
        self.seed = seed & keyed.MASK64

    def row(self, t, lo, hi):
        return self.spec.sample_row(self.seed, t, lo, hi)

    def materialize(self):
        return Field.materialize(self)


def sample_environment(spec: WeightSpec, region: Region, seed: int, lazy: bool = False) -> Field:
    """Realize independent weights on ``region`` from ``spec`` under ``seed``."""
    if not isinstance(spec, WeightSpec):
        raise InvalidSpec(f"expected a WeightSpec, got {type(spec).__name__}")
    seed &= keyed.MASK64
    if lazy:
        return LazyEnvironment(spec, region, seed)
    x0 = region.x_min
    width = region.x_max - x0 + 1
    dense = np.full((region.lo.size, width), np.nan)
    cols = np.arange(x0, x0 + width)
    inside = (cols[None, :] >= region.lo[:, None]) & (cols[None, :] <= region.hi[:, None])
    rows_i, cols_j = np.nonzero(inside)
    xs = cols[cols_j]
    ts = rows_i + region.t_min
    dense[rows_i, cols_j] = spec.sample_points(seed, xs, ts)
    return Environment(region, dense, x0, spec=spec, seed=seed)


class _View(Field):
    def __init__(self, base: Field):
        self.base = base
        self.region = base.region
        self.spec = base.spec
        self.seed = base.seed


class BulkView(_View):
    """The base field with column 0 redrawn from the bulk law.

    Agrees with the base at every ``x != 0``; the new column-0 weights
    depend only on ``(base seed, aux_seed, t)``.
    """

    def __init__(self, base: Field, aux_seed: int, bulk_law: Distribution | None = None):
        super().__init__(base)
        law = bulk_law or (base.spec.bulk if base.spec is not None else None)
        if law is None:
            raise InvalidSpec("a bulk view of an explicit field needs the bulk law")
        self.law = law
        self.aux_seed = aux_seed & keyed.MASK64
        self._key = keyed.combine(base.seed or 0, self.aux_seed, _BULK_STREAM)
        self.spec = WeightSpec.iid(law)

    def row(self, t, lo, hi):
        out = self.base.row(t, lo, hi)
        if lo <= 0 <= hi:
            out = out.copy()
            out[-lo] = self.column0(t)
        return out

    def column0(self, t: int) -> float:
        return float(self.law.sample(self._key, np.zeros(1, dtype=np.int64), t)[0])


def bulk_view(env: Field, aux_seed: int) -> BulkView:
    return BulkView(env, aux_seed)


class TruncatedView(_View):
    def __init__(self, base: Field, cutoff: float):
        super().__init__(base)
        if not cutoff > 0:
            raise ValueError("cutoff must be positive")
        self.cutoff = float(cutoff)

    def row(self, t, lo, hi):
        return np.minimum(self.base.row(t, lo, hi), self.cutoff)


def truncate(env: Field, cutoff: float) -> Field:
    """Pointwise ``min(weight, cutoff)``; ``cutoff = inf`` is the identity."""
    if cutoff == math.inf:
        return env
    return TruncatedView(env, cutoff)


class RowOverrideView(_View):
    """The base field with part of one row replaced."""

    def __init__(self, base: Field, t: int, lo: int, values: np.ndarray):
        super().__init__(base)
        self.t = int(t)
        self.lo = int(lo)
        self.values = np.asarray(values, dtype=np.float64)
        self.spec = None if base.spec is None else base.spec

    def row(self, t, lo, hi):
        out = self.base.row(t, lo, hi)
        if t != self.t:
            return out
        a = max(lo, self.lo)
        b = min(hi, self.lo + self.values.size - 1)
        if a > b:
            return out
        out = out.copy()
        out[a - lo:b - lo + 1] = self.values[a - self.lo:b - self.lo + 1]
        return out


def perturb_row(env: Field, row: int, x_max: int, value: float) -> Field:
    """Set the weights ``(x, row)`` for ``x = 0..x_max`` to ``value``."""
    lo, hi = env.region.bounds(row)
    if lo > hi:
        raise OutOfRegion(f"row {row} does not meet the region")
    if not value > 0:
        raise ValueError("replacement weight must be positive")
    return RowOverrideView(env, row, 0, np.full(x_max + 1, float(value)))


def resample_row(env: Field, row: int, aux_seed: int) -> Field:
    """Replace row ``row`` by an independent draw from the same laws."""
    if env.spec is None:
        raise InvalidSpec("cannot resample an explicit field without a weight spec")
    lo, hi = env.region.bounds(row)
    key = keyed.combine(env.seed or 0, aux_seed & keyed.MASK64, _RESAMPLE_STREAM)
    return RowOverrideView(env, row, lo, env.spec.sample_row(key, row, lo, hi))


def resampled_row_values(env: Field, row: int, aux_seed: int, lo: int, hi: int) -> np.ndarray:
    """Independent redraw of ``(lo..hi, row)`` keyed like :func:`resample_row`."""
    key = keyed.combine(env.seed or 0, aux_seed & keyed.MASK64, _RESAMPLE_STREAM)
    return env.spec.sample_row(key, row, lo, hi)


class ShiftedView(_View):
    """``w'(x, t) = w(x + dx, t + dt)``, a translated copy of the base field."""

    def __init__(self, base: Field, dx: int, dt: int):
        super().__init__(base)
        self.dx, self.dt = int(dx), int(dt)
        r = base.region
        self.region = Region(r.t_min - self.dt, r.lo - self.dx, r.hi - self.dx)

    def row(self, t, lo, hi):
        return self.base.row(t + self.dt, lo + self.dx, hi + self.dx)


# ---------------------------------------------------------------- snapshots

MAGIC = b"HSPE1"


def save_snapshot(env: Field, path: str | Path) -> None:
    """Write a field as an HSPE1 file.

    Layout (little-endian): magic ``HSPE1``; ``u64`` seed; ``i64`` t_min,
    t_max, x_min, x_max; ``u32`` length + UTF-8 JSON of the weight spec
    (``null`` for explicit fields); ``i64[rows]`` lo and hi per row; then
    ``f64[rows * (x_max - x_min + 1)]`` weights row-major over the bounding
    box, NaN outside the region.
    """
    env = env.materialize()
    reg = env.region
    spec_json = json.dumps(env.spec.to_dict() if env.spec is not None else None, sort_keys=True)
    spec_bytes = spec_json.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Qqqqq", (env.seed or 0) & keyed.MASK64, reg.t_min, reg.t_max, reg.x_min, reg.x_max))
        fh.write(struct.pack("<I", len(spec_bytes)))
        fh.write(spec_bytes)
        fh.write(reg.lo.astype("<i8").tobytes())
        fh.write(reg.hi.astype("<i8").tobytes())
        fh.write(np.ascontiguousarray(env.dense, dtype="<f8").tobytes())


def load_snapshot(path: str | Path) -> Environment:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ValueError(f"{path} is not an HSPE1 snapshot")
    off = 5
    seed, t_min, t_max, x_min, x_max = struct.unpack_from("<Qqqqq", data, off)
    off += 40
    (n_spec,) = struct.unpack_from("<I", data, off)
    off += 4
    spec_raw = json.loads(data[off:off + n_spec].decode("utf-8"))
    off += n_spec
    rows = t_max - t_min + 1
    lo = np.frombuffer(data, dtype="<i8", count=rows, offset=off).astype(np.int64)
    off += 8 * rows
    hi = np.frombuffer(data, dtype="<i8", count=rows, offset=off).astype(np.int64)
    off += 8 * rows
    width = x_max - x_min + 1
    dense = np.frombuffer(data, dtype="<f8", count=rows * width, offset=off).reshape(rows, width).astype(np.float64)
    spec = WeightSpec.from_dict(spec_raw) if spec_raw is not None else None
    return Environment(Region(t_min, lo, hi), dense, x_min, spec=spec, seed=seed)
