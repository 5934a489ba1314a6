"""Exit criteria at desk scale.

Each test prints (and records for the terminal summary) one line of the form
``[PASS] C<k> <name>: <measurements>``.  Run on their own with
``pytest -m acceptance -s``.
"""

from __future__ import annotations

import math
import time

import pytest

from conftest import ACCEPTANCE_LINES
from polymer_lab.environment import BOUND_PHASE, CONTROL, Constant, WeightSpec
from polymer_lab.estimators import (block_decomposition, clt_sample, efron_stein_sum, estimate_lln_gap,
                                    excursion_identity_check, lindeberg_sum, midpoint_tail, near_vertical_gap,
                                    power_rule, variance_curve)
from polymer_lab.estimators import endpoint
from polymer_lab.harness.config import parse_config
from polymer_lab.harness.oracle import validate_against_oracle
from polymer_lab.harness.runner import run_experiment

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SEED = 0
KS_LEVEL_1PCT = 1.63


def report(number: int, name: str, passed: bool, elapsed: float, limit: float | None, **values) -> None:
    within = limit is None or elapsed < limit
    ok = bool(passed and within)
    parts = [f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items()]
    parts.append(f"time={elapsed:.1f}s" + (f" (limit {limit:.0f}s)" if limit else ""))
    line = f"[{'PASS' if ok else 'FAIL'}] C{number:<2d} {name}: " + ", ".join(parts)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line
    assert within, line


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


@pytest.fixture(scope="module")
def oracle():
    with Timer() as t:
        rep = validate_against_oracle(seed=SEED, instance_count=200, checks=("free_energy", "geodesic", "events"))
    return rep, t.elapsed


def test_c01_oracle_equivalence(oracle):
    rep, elapsed = oracle
    names = ("free_energy", "last_passage", "leftmost_geodesic", "leftmost_geodesic_ties", "event_probability")
    report(1, "oracle equivalence", all(rep.check(n).passed for n in names), elapsed, 60,
           instances=rep.check("free_energy").cases, max_rel_F_error=rep.check("free_energy").worst_error,
           L_mismatches=int(rep.check("last_passage").worst_error > 0),
           geodesic_mismatches=int(rep.check("leftmost_geodesic").worst_error + rep.check("leftmost_geodesic_ties").worst_error),
           max_event_error=rep.check("event_probability").worst_error)


def test_c02_sampler_exactness():
    with Timer() as t:
        rep = validate_against_oracle(seed=SEED, instance_count=1, checks=("sampler",), sampler_instances=20,
                                      sampler_draws=100_000)
    c = rep.check("sampler_chi_square")
    report(2, "sampler chi-square", c.passed, t.elapsed, 120, instances=c.cases, min_pvalue=c.worst_error,
           level=1e-3)


def test_c03_coupling():
    with Timer() as t:
        rep = validate_against_oracle(seed=SEED, instance_count=1, checks=("coupling",), coupling_instances=5,
                                      coupling_draws=2000)
    o, c, m = rep.check("coupling_ordered"), rep.check("coupling_connected"), rep.check("coupling_marginals")
    report(3, "coupling invariants", o.passed and c.passed and m.passed, t.elapsed, 300, draws=o.cases,
           order_violations=int(o.worst_error), disconnected=int(c.worst_error), max_midpoint_tv=m.worst_error)


def test_c04_excursion_identity():
    with Timer() as t:
        res = excursion_identity_check(BOUND_PHASE, 40, 10_000, seed=SEED, alpha=0.01)
    report(4, "excursion identity", res.ks.passed and res.identity_holds, t.elapsed, 300,
           ks=res.ks.statistic, ks_critical=res.ks.critical, identity_max_rel_error=res.identity_error)


def test_c05_lln_separation():
    with Timer() as t:
        bound = estimate_lln_gap(BOUND_PHASE, [2000], 200, seed=SEED)[0]
        control = estimate_lln_gap(CONTROL, [2000], 200, seed=SEED)[0]
    ok = bound.gap_hat > 0 and bound.gap_ci[0] > 0 and control.gap_ci[0] <= 0 <= control.gap_ci[1]
    report(5, "LLN separation", ok, t.elapsed, 600, gap_hat=bound.gap_hat, ci_low=bound.gap_ci[0],
           ci_high=bound.gap_ci[1], control_gap=control.gap_hat, control_ci_low=control.gap_ci[0],
           control_ci_high=control.gap_ci[1])


def test_c06_pinning_midpoint_tail():
    ks = list(range(5, 31))
    with Timer() as t:
        bound = midpoint_tail(BOUND_PHASE, 2000, ks, 200, seed=SEED)
        control = midpoint_tail(CONTROL, 2000, [30], 200, seed=SEED)
    med30 = bound.point(30).median
    ctrl30 = control.point(30).median
    ok = bound.fit.slope < 0 and bound.fit.r_squared >= 0.9 and med30 < 1e-3 and ctrl30 > 1e-2
    report(6, "midpoint tail", ok, t.elapsed, 900, slope=bound.fit.slope, r_squared=bound.fit.r_squared,
           median_k30=med30, control_median_k30=ctrl30)


def test_c07_linear_variance():
    with Timer() as t:
        curve = variance_curve(BOUND_PHASE, [200, 500, 1000, 2000], 1000, seed=SEED)
        es = efron_stein_sum(BOUND_PHASE, 500, 2000, seed=SEED)
    spread = curve.spread_about_median
    ratio, se = es.ratio()
    ok = spread <= 2 and ratio <= 1.05
    report(7, "linear variance", ok, t.elapsed, 1800,
           **{f"var_over_n_{p.n}": p.ratio for p in curve.points}, spread_about_median=spread,
           efron_stein_ratio=ratio, efron_stein_se=se)


def test_c08_clt():
    with Timer() as t:
        pos = clt_sample(BOUND_PHASE, 2000, 2000, seed=SEED)
        zero = clt_sample(BOUND_PHASE, 2000, 2000, mode="zero", seed=SEED)
    crit = KS_LEVEL_1PCT / math.sqrt(2000)
    ok = pos.report.ks_statistic < crit and zero.report.ks_statistic < crit
    report(8, "CLT", ok, t.elapsed, 1800, ks_free_energy=pos.report.ks_statistic,
           ks_last_passage=zero.report.ks_statistic, critical=crit, ad_free_energy=pos.report.ad_statistic,
           ad_last_passage=zero.report.ad_statistic)


def test_c09_block_decomposition():
    const = WeightSpec(Constant(1.0), Constant(1.0))
    with Timer() as t:
        pos = block_decomposition(BOUND_PHASE, 2000, 36, 200, 200, seed=SEED)
        zero = block_decomposition(BOUND_PHASE, 2000, 36, 200, 200, mode="zero", seed=SEED)
        flat = block_decomposition(const, 2000, 36, 200, 2, mode="zero", seed=SEED)
    d_pos, d_zero = float(pos.discrepancy.mean()), float(zero.discrepancy.mean())
    c_pos, c_zero = pos.adjacent_correlation, zero.adjacent_correlation
    ok = (d_pos <= 0.2 and d_zero <= 0.2 and abs(c_pos) <= 0.1 and abs(c_zero) <= 0.1
          and float(flat.discrepancy.max()) == 0.0)
    report(9, "block decomposition", ok, t.elapsed, 900, N=pos.layout.N, mean_discrepancy=d_pos,
           mean_discrepancy_zero=d_zero, adjacent_corr=c_pos, adjacent_corr_zero=c_zero,
           constant_discrepancy=float(flat.discrepancy.max()))


def test_c10_near_vertical():
    with Timer() as t:
        res = near_vertical_gap(BOUND_PHASE, [500, 1000, 2000], power_rule(0.3), 200, seed=SEED)
    report(10, "near-vertical", res.strictly_decreasing, t.elapsed, 900,
           **{f"mean_n{p.n}_y{p.y}": p.mean for p in res.points})


def test_c11_lindeberg():
    with Timer() as t:
        res = lindeberg_sum(BOUND_PHASE, 2000, [0.0, 0.5], 1000, seed=SEED)
    s0, s5 = res.sum_at(0.0), res.sum_at(0.5)
    report(11, "Lindeberg", abs(s0 - 1) <= 0.05 and s5 <= 0.1, t.elapsed, 600, J=res.layout.J, K=res.layout.K,
           blocks=res.layout.N + 1, sum_eps0=s0, sum_eps05=s5)


DETERMINISM_CONFIGS = [
    {"experiment": "validate", "instance_count": 5, "seed": 3},
    {"experiment": "lln", "n_list": [20, 40], "replicates": 8},
    {"experiment": "pinning", "n": 30, "s1": 5, "s2_list": [10, 20], "replicates": 8},
    {"experiment": "midpoint", "n": 30, "k_list": [0, 2, 5], "replicates": 8},
    {"experiment": "variance", "n_list": [10, 20], "replicates": 100},
    {"experiment": "clt", "n": 10, "replicates": 1000},
    {"experiment": "blocks", "n": 200, "J": 8, "K": 40, "replicates": 6},
    {"experiment": "near-vertical", "n_list": [20, 40], "y_rule": {"power": 0.3}, "replicates": 8},
    {"experiment": "ldp", "t_list": [10, 20], "delta": 0.05, "replicates": 20},
    {"experiment": "influence", "n": 30, "rows": [3, 12], "x_max": 3, "replicates": 8},
    {"experiment": "efron-stein", "n": 10, "replicates": 50},
    {"experiment": "lindeberg", "n": 400, "epsilon_list": [0.0, 0.5], "J": 8, "K": 18, "replicates": 20},
    {"experiment": "excursion", "n": 10, "replicates": 40},
    {"experiment": "couple-demo", "u": [0, 0], "v": [0, 20], "u2": [2, 0], "v2": [2, 20], "replicates": 8},
]


def test_c12_determinism(tmp_path):
    bad = []
    with Timer() as t:
        for data in DETERMINISM_CONFIGS:
            outputs = []
            for i, threads in enumerate((1, 2, 1)):
                endpoint.clear_memo()
                out = tmp_path / f"{data['experiment']}-{i}"
                cfg = parse_config({**data, "threads": threads, "out": str(out)})
                run_experiment(cfg, echo=None)
                outputs.append(((out / "replicates.csv").read_bytes(), (out / "summary.csv").read_bytes()))
            if not outputs[0] == outputs[1] == outputs[2]:
                bad.append(data["experiment"])
    report(12, "determinism", not bad, t.elapsed, None, experiments=len(DETERMINISM_CONFIGS),
           thread_counts="1,2,1", mismatched=",".join(bad) or "none")
