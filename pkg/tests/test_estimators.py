from __future__ import annotations

import math

import numpy as np
import pytest

from polymer_lab.engine import event_probability, free_energy, query
from polymer_lab.environment import BOUND_PHASE, Constant, Exponential, Region, WeightSpec, perturb_row, sample_environment
from polymer_lab.errors import DegenerateSample, InadmissibleSpec, LayoutInvalid, PreconditionViolated
from polymer_lab.estimators import (BlockLayout, block_decomposition, ceil_even, clt_sample, couple_demo,
                                    default_layout, efron_stein_sum, estimate_lln_gap, excursion_identity_check,
                                    floor_even, influence_profile, ldp_check, lindeberg_layout, lindeberg_sum,
                                    midpoint_tail, near_vertical_gap, pinning_curve, replicate_map, resolve_threads,
                                    row_maximum_quantile, variance_curve)
from polymer_lab.estimators.pinning import midpoint_log_tail
from polymer_lab.events import avoids_wall
from polymer_lab.lattice import count_paths
from polymer_lab.sampling import leftmost_geodesic

CONST = WeightSpec(Constant(1.0), Constant(1.0))
SMALL = WeightSpec(Exponential(1.0), Exponential(0.5))


# ---------------------------------------------------------------- plumbing


def _square(r):
    return r * r


def test_replicate_map_order_and_threads(monkeypatch):
    assert replicate_map(_square, 5, 1) == [0, 1, 4, 9, 16]
    assert replicate_map(_square, 5, 2) == [0, 1, 4, 9, 16]
    assert replicate_map(_square, [3, 1], 1) == [9, 1]
    monkeypatch.setenv("POLYMER_LAB_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("POLYMER_LAB_THREADS", "many")
    with pytest.raises(ValueError):
        resolve_threads()


def test_even_rounding():
    assert ceil_even(3.1) == 4 and ceil_even(4) == 4
    assert floor_even(5.9) == 4 and floor_even(6) == 6


# ---------------------------------------------------------------- LLN and excursion


def test_lln_constant_examples():
    zero = estimate_lln_gap(CONST, [10], 3, mode="zero")[0]
    assert zero.g_hat == pytest.approx(1.1) and zero.gap_hat == 0
    pos = estimate_lln_gap(CONST, [24], 3)[0]
    assert pos.g_hat == pytest.approx((25 + math.log(208012)) / 24, rel=1e-12)
    assert pos.std_errors["g"] == 0


def test_lln_is_deterministic_and_paired():
    a = estimate_lln_gap(SMALL, [20, 40], 20, seed=3)
    b = estimate_lln_gap(SMALL, [20, 40], 20, seed=3, threads=2)
    assert a.replicate_rows() == b.replicate_rows()
    # the bulk side restricted to the half-space is dominated by the original model
    assert a[1].g_hat > a[1].g_bulk_hat


def test_lln_rejects_odd_heights():
    with pytest.raises(PreconditionViolated):
        estimate_lln_gap(SMALL, [9], 3)


def test_excursion_constant_closed_form():
    n = 12
    res = excursion_identity_check(CONST, n, 20)
    expected = (n - 1) + math.log(count_paths((0, 0), (0, n - 2))) + 2
    assert np.allclose(res.excursion, expected) and np.allclose(res.bulk_side, expected)
    assert res.ks.statistic == 0 and res.identity_holds


@pytest.mark.parametrize("mode", ["positive", "zero"])
def test_excursion_identity_exact(mode):
    res = excursion_identity_check(BOUND_PHASE, 40, 50, mode=mode, seed=2)
    assert res.identity_error <= 1e-12


def test_excursion_small_n_distribution():
    res = excursion_identity_check(BOUND_PHASE, 4, 10_000, seed=1)
    assert res.ks.passed


# ---------------------------------------------------------------- probabilities


def test_pinning_constant():
    curve = pinning_curve(CONST, 4, 1, [3], 2)
    assert curve.point(3).median == pytest.approx(0.5)


def test_pinning_degenerate_interval_matches_midpoint():
    n = 20
    pin = pinning_curve(CONST, n, n // 2, [n // 2], 2)
    mid = midpoint_tail(CONST, n, [0], 2)
    assert pin.point(n // 2).median == pytest.approx(mid.point(0).median, rel=1e-12)
    env = sample_environment(BOUND_PHASE, Region.cone((0, 0), (0, n)), 9)
    direct = event_probability(query((0, 0), (0, n)), env, avoids_wall(n // 2, n // 2))
    assert math.exp(midpoint_log_tail(env, n, [0], pin.mode)[0]) == pytest.approx(direct, rel=1e-12)


def test_pinning_preconditions():
    with pytest.raises(PreconditionViolated):
        pinning_curve(CONST, 10, 0, [3], 1)
    with pytest.raises(PreconditionViolated):
        pinning_curve(CONST, 10, 4, [2], 1)


def test_midpoint_examples():
    assert midpoint_tail(CONST, 4, [1], 1).point(1).median == pytest.approx(0.5)
    curve = midpoint_tail(BOUND_PHASE, 20, [0, 3, 10, 12], 5)
    assert curve.point(10).median == 0 and curve.point(12).median == 0
    assert curve.point(0).median >= curve.point(3).median
    with pytest.raises(PreconditionViolated):
        midpoint_tail(CONST, 4, [-1], 1)


def test_midpoint_zero_temperature_is_indicator():
    curve = midpoint_tail(BOUND_PHASE, 20, [0, 2], 10, mode="zero")
    assert set(np.unique(np.exp(curve.log_probabilities))) <= {0.0, 1.0}


# ---------------------------------------------------------------- endpoint statistics


def test_variance_constant_is_zero():
    curve = variance_curve(CONST, [4, 8], 100)
    assert np.all(curve.ratios == 0)
    with pytest.raises(InadmissibleSpec):
        variance_curve(CONST, [4, 8], 100, require_unbounded=True)
    with pytest.raises(PreconditionViolated):
        variance_curve(CONST, [4], 99)


def test_endpoint_memo_is_shared():
    from polymer_lab.estimators import endpoint

    endpoint.clear_memo()
    a = variance_curve(SMALL, [20], 100, seed=4).samples[20]
    b = clt_sample(SMALL, 20, 1000, seed=4).values
    assert np.array_equal(a, b[:100])
    endpoint.clear_memo()
    assert np.array_equal(clt_sample(SMALL, 20, 1000, seed=4).values[:100], a)


def test_clt_degenerate_and_preconditions():
    with pytest.raises(DegenerateSample):
        clt_sample(CONST, 10, 1000)
    with pytest.raises(PreconditionViolated):
        clt_sample(SMALL, 10, 999)


def test_clt_summary():
    res = clt_sample(SMALL, 10, 1000, seed=2)
    assert abs(res.z.mean()) < 1e-12 and res.z.std(ddof=1) == pytest.approx(1.0)
    assert len(res.summary_rows()) == 99 and len(res.summary_lines()) == 1


def test_ldp_trivial_cases():
    assert all(p.frequency == 0 for p in ldp_check(CONST, [10, 20], 0.1, 10).points)
    assert all(p.frequency == 0 for p in ldp_check(BOUND_PHASE, [10, 20], 1e6, 50).points)
    with pytest.raises(PreconditionViolated):
        ldp_check(CONST, [10], -1.0, 10)


# ---------------------------------------------------------------- blocks


def test_block_layout_example():
    L = BlockLayout(1000, 16, 64)
    assert L.N == 15 and L.s[0] == 64 and L.m[1] == 80 and L.t[0] == 96
    assert L.m[0] == 0 and L.m[-1] == 1000
    with pytest.raises(LayoutInvalid):
        BlockLayout(1000, 32, 64)
    with pytest.raises(LayoutInvalid):
        BlockLayout(100, 16, 90)
    with pytest.raises(LayoutInvalid):
        BlockLayout(1000, 15, 64)


def test_default_layouts_valid():
    for n in (200, 500, 1000, 2000):
        default_layout(n)
    L = lindeberg_layout(2000)
    assert L.N + 1 >= 40 and L.K > 2 * L.J
    with pytest.raises(LayoutInvalid):
        lindeberg_layout(40)


def test_block_telescoping_constant():
    res = block_decomposition(CONST, 200, 8, 40, 2, mode="zero")
    assert np.all(res.discrepancy == 0)


def test_block_decomposition_small():
    res = block_decomposition(BOUND_PHASE, 200, 8, 40, 10, seed=1)
    G0 = res.G0
    assert G0.shape == (10, res.layout.N + 1)
    assert np.all(res.G >= G0.sum(axis=1) - 1e-9)  # superadditivity across the pinned points
    assert np.all((0 <= res.constrained) & (res.constrained <= 1 + 1e-12))


def test_lindeberg_trivial_cases():
    res = lindeberg_sum(BOUND_PHASE, 400, [0.0, 1e3], 50, J=8, K=18)
    assert res.sum_at(0.0) == pytest.approx(1.0, abs=1e-12)
    assert res.sum_at(1e3) == 0


# ---------------------------------------------------------------- near-vertical


def test_near_vertical_trivial_cases():
    res = near_vertical_gap(BOUND_PHASE, [20, 40], 0, 5)
    assert np.all(res.samples == 0)
    res = near_vertical_gap(CONST, [4, 10], 2, 2, mode="zero")
    assert np.all(res.samples == 0)
    res = near_vertical_gap(CONST, [10], {10: 4}, 2)
    assert res.points[0].y == 4
    with pytest.raises(PreconditionViolated):
        near_vertical_gap(CONST, [10], 3, 2)


# ---------------------------------------------------------------- perturbations


def test_influence_equal_thresholds():
    res = influence_profile(BOUND_PHASE, 40, [5, 20], 3, 2.0, 2.0, 5)
    assert np.all(res.deltas == 0)
    with pytest.raises(PreconditionViolated):
        influence_profile(BOUND_PHASE, 40, [5], 3, 3.0, 2.0, 5)
    with pytest.raises(PreconditionViolated):
        influence_profile(BOUND_PHASE, 40, [41], 3, 1.0, 2.0, 5)


def test_influence_zero_temperature_geodesic_bound():
    n, rows, x_max, lo, hi = 40, [4, 15, 30], 3, 1.0, 2.5
    res = influence_profile(BOUND_PHASE, n, rows, x_max, lo, hi, 20, mode="zero", seed=1)
    assert np.all(res.deltas >= -1e-12)
    checked = 0
    for r in range(20):
        env = res.env_source.environment(r)
        for i, j in enumerate(rows):
            low_env = perturb_row(env, j, x_max, lo)
            if leftmost_geodesic((0, 0), (0, n), low_env).at(j) <= x_max:
                checked += 1
                assert res.deltas[r, i] >= hi - lo - 1e-9
    assert checked > 0


def test_influence_direct_recomputation():
    n, j = 30, 12
    res = influence_profile(BOUND_PHASE, n, [j], 4, 1.0, 3.0, 3, seed=5)
    env = res.env_source.environment(2)
    q = query((0, 0), (0, n))
    direct = free_energy(q, perturb_row(env, j, 4, 3.0)) - free_energy(q, perturb_row(env, j, 4, 1.0))
    assert res.deltas[2, 0] == pytest.approx(direct, rel=1e-10)


def test_row_maximum_quantile():
    b = row_maximum_quantile(BOUND_PHASE, 5)
    from scipy import stats

    p = stats.expon(scale=4.0).cdf(b) * stats.expon().cdf(b) ** 5
    assert p == pytest.approx(0.9, abs=1e-10)


def test_efron_stein_constant():
    res = efron_stein_sum(CONST, 10, 50)
    assert res.variance == 0 and res.efron_stein == 0
    with pytest.raises(PreconditionViolated):
        efron_stein_sum(CONST, 10, 49)


def test_efron_stein_single_path():
    res = efron_stein_sum(BOUND_PHASE, 2, 4000, seed=3)
    ratio, se = res.ratio()
    assert ratio <= 1 + 3 * se


# ---------------------------------------------------------------- coupling demo


@pytest.mark.parametrize("mode", ["positive", "zero"])
def test_couple_demo(mode):
    res = couple_demo(BOUND_PHASE, (0, 0), (0, 30), (2, 0), (4, 30), 10, mode=mode, seed=2)
    assert res.ordered_fraction == 1.0 and res.connected_fraction == 1.0
    assert len(res.replicate_rows()) == 10
