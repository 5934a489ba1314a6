from __future__ import annotations

import math

import numpy as np
import pytest

from polymer_lab.engine import FreeEnergyQuery, Mode, free_energy
from polymer_lab.environment import (BOUND_PHASE, Constant, Distribution, Environment, Exponential, Gamma, Region,
                                     WeightSpec, bulk_view, load_snapshot, perturb_row, resample_row,
                                     sample_environment, save_snapshot, truncate)
from polymer_lab.errors import InadmissibleSpec, InvalidSpec


def test_constant_field():
    env = sample_environment(WeightSpec.iid(Constant(1.0)), Region.rectangle(0, 20, 15), 7)
    assert np.all(env.values() == 1.0)


def test_same_point_twice_is_identical():
    spec = WeightSpec.iid(Exponential(1.0))
    a = sample_environment(spec, Region.rectangle(0, 10, 10), 99)
    b = sample_environment(spec, Region.rectangle(0, 10, 10), 99)
    assert a.weight(3, 7) == a.weight(3, 7) == b.weight(3, 7)
    assert np.array_equal(a.dense, b.dense, equal_nan=True)


def test_exponential_mean_and_rate():
    env = sample_environment(WeightSpec.iid(Exponential(1.0)), Region.rectangle(0, 999, 999), 3)
    w = env.values()
    assert w.size == 10**6
    assert abs(w.mean() - 1.0) < 0.01
    faster = sample_environment(WeightSpec.iid(Exponential(4.0)), Region.rectangle(0, 999, 999), 4).values()
    assert abs(1.0 / faster.mean() - 4.0) < 0.04
    assert np.all(w > 0)


def test_gamma_moments():
    w = sample_environment(WeightSpec.iid(Gamma(2.5, 2.0)), Region.rectangle(0, 499, 499), 5).values()
    assert abs(w.mean() - 1.25) < 0.01
    assert abs(w.var() - 2.5 / 4.0) < 0.01
    small = sample_environment(WeightSpec.iid(Gamma(0.5, 1.0)), Region.rectangle(0, 499, 499), 6).values()
    assert abs(small.mean() - 0.5) < 0.01
    assert np.all(small > 0)


def test_vertical_column_uses_vertical_law():
    env = sample_environment(BOUND_PHASE, Region.rectangle(0, 99_999, 1), 11)
    col0 = env.dense[:, 0]
    col1 = env.dense[:, 1]
    assert abs(col0.mean() - 4.0) < 0.06
    assert abs(col1.mean() - 1.0) < 0.015


def test_region_extension_stability():
    small = sample_environment(BOUND_PHASE, Region.cone((0, 0), (0, 40)), 21)
    big = sample_environment(BOUND_PHASE, Region.rectangle(-5, 60, 50), 21)
    for x, t in [(0, 0), (0, 17), (3, 5), (10, 20), (1, 39)]:
        assert small.weight(x, t) == big.weight(x, t)


def test_lazy_matches_dense():
    region = Region.cone((0, 0), (0, 30))
    dense = sample_environment(BOUND_PHASE, region, 5)
    lazy = sample_environment(BOUND_PHASE, region, 5, lazy=True)
    for t in range(31):
        lo, hi = region.bounds(t)
        assert np.array_equal(dense.row(t, lo, hi), lazy.row(t, lo, hi))


@pytest.mark.parametrize("bad", [{"family": "exponential", "rate": 0}, {"family": "gamma", "shape": -1, "rate": 1},
                                 {"family": "constant", "value": math.nan}, {"family": "cauchy"}])
def test_invalid_spec(bad):
    with pytest.raises(InvalidSpec):
        Distribution.from_dict(bad)


def test_spec_roundtrip_and_admissibility():
    assert WeightSpec.from_dict(BOUND_PHASE.to_dict()) == BOUND_PHASE
    with pytest.raises(InadmissibleSpec):
        WeightSpec.iid(Constant(1.0)).require_unbounded()
    BOUND_PHASE.require_unbounded()


def test_bulk_view_constant_is_identity():
    env = Environment.constant(1.0, Region.rectangle(0, 10, 10))
    view = bulk_view(env, 5)
    for t in range(11):
        assert np.array_equal(view.row(t, 0, 10), env.row(t, 0, 10))


def test_bulk_view_agrees_off_the_wall():
    env = sample_environment(BOUND_PHASE, Region.rectangle(0, 20, 10), 8)
    view = bulk_view(env, 123)
    assert view.weight(3, 7) == env.weight(3, 7)
    assert view.weight(0, 7) != env.weight(0, 7)
    assert bulk_view(env, 123).weight(0, 4) == view.weight(0, 4)


def test_bulk_view_column_law_and_independence():
    env = sample_environment(BOUND_PHASE, Region.rectangle(0, 99_999, 0), 9)
    view = bulk_view(env, 77)
    base = env.dense[:, 0]
    fresh = np.array([view.row(t, 0, 0)[0] for t in range(0, 100_000, 1)])
    assert abs(fresh.mean() - 1.0) < 0.02
    assert abs(np.corrcoef(base, fresh)[0, 1]) < 0.01


def test_truncate():
    env = Environment.from_function(lambda x, t: [0.5, 2.0, 9.0][x], Region.rectangle(0, 0, 2))
    assert truncate(env, 2.0).row(0, 0, 2).tolist() == [0.5, 2.0, 2.0]
    assert truncate(env, math.inf) is env
    five = Environment.constant(5.0, Region.rectangle(0, 3, 3))
    assert np.all(truncate(five, 1.0).row(2, 0, 3) == 1.0)


def test_perturb_row():
    env = Environment.constant(1.0, Region.rectangle(0, 6, 6))
    same = perturb_row(env, 3, 4, 1.0)
    assert np.array_equal(same.row(3, 0, 6), env.row(3, 0, 6))
    rnd = sample_environment(BOUND_PHASE, Region.rectangle(0, 6, 6), 2)
    one = perturb_row(rnd, 3, 0, 50.0)
    assert one.weight(0, 3) == 50.0
    assert np.array_equal(one.row(3, 1, 6), rnd.row(3, 1, 6))
    assert np.array_equal(one.row(2, 0, 6), rnd.row(2, 0, 6))


def test_perturb_row_monotone(rng):
    for i in range(50):
        env = sample_environment(BOUND_PHASE, Region.rectangle(0, 10, 12), int(rng.integers(2**62)))
        row = int(rng.integers(0, 11))
        x_max = int(rng.integers(0, 5))
        b = float(rng.uniform(0.1, 5))
        q = FreeEnergyQuery((0, 0), (0, 10), Mode.POSITIVE)
        lo = free_energy(q, perturb_row(env, row, x_max, b))
        hi = free_energy(q, perturb_row(env, row, x_max, b + float(rng.uniform(0, 3))))
        assert hi >= lo


def test_resample_row_changes_only_that_row():
    env = sample_environment(BOUND_PHASE, Region.rectangle(0, 8, 8), 4)
    new = resample_row(env, 5, 99)
    assert np.all(new.row(5, 0, 8) != env.row(5, 0, 8))
    assert np.array_equal(new.row(4, 0, 8), env.row(4, 0, 8))


def test_snapshot_roundtrip(tmp_path):
    env = sample_environment(BOUND_PHASE, Region.cone((0, 0), (0, 30)), 31)
    path = tmp_path / "env-0.hspe"
    save_snapshot(env, path)
    assert path.read_bytes()[:5] == b"HSPE1"
    back = load_snapshot(path)
    assert back.region == env.region
    assert back.spec == env.spec and back.seed == env.seed
    assert np.array_equal(back.dense, env.dense, equal_nan=True)
