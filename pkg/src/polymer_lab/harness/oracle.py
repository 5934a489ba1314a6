"""Small-instance equivalence battery against brute-force path enumeration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats as sps

from ..engine import FreeEnergyQuery, Mode, event_probability, free_energy
from ..environment import Constant, Environment, Exponential, Gamma, Region, WeightSpec, sample_environment
from ..events import All, AnyOf, Avoids, Event, Not, PositionIn
from ..errors import CapExceeded
from ..lattice import DEFAULT_CAP, DirectedPath, Point, Segment, enumerate_paths, hamiltonian
from ..sampling import PolymerSampler, coalescence_summary, coupled_pair, leftmost_geodesic, rng_stream
from ..estimators import stats

FreeEnergyFn = Callable[[FreeEnergyQuery, object], float]

FREE_ENERGY_TOLERANCE = 1e-9
EVENT_TOLERANCE = 1e-9
CHI_SQUARE_LEVEL = 1e-3
TV_LIMIT = 0.03


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    worst_error: float
    detail: str = ""


@dataclass
class OracleReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: cases={c.cases} worst={c.worst_error:.3g}"
                + (f" ({c.detail})" if c.detail else "") for c in self.checks]

    def rows(self) -> list[dict]:
        return [{"check": c.name, "passed": int(c.passed), "cases": c.cases, "worst_error": c.worst_error,
                 "detail": c.detail} for c in self.checks]


# ---------------------------------------------------------------- instances


@dataclass
class Instance:
    u: Point
    v: Point
    env: Environment
    paths: list[DirectedPath]

    def hamiltonians(self) -> np.ndarray:
        return np.array([hamiltonian(p, self.env) for p in self.paths])


def _random_law(rng: np.random.Generator):
    if rng.random() < 0.5:
        return Exponential(float(rng.uniform(0.3, 3.0)))
    return Gamma(float(rng.uniform(0.3, 3.0)), float(rng.uniform(0.3, 3.0)))


def random_instance(rng: np.random.Generator, max_height: int = 12, max_paths: int | None = None,
                    constant: bool = False) -> Instance:
    """Random endpoints with ``v.t - u.t <= max_height`` and random Exponential/Gamma weights."""
    while True:
        height = int(rng.integers(1, max_height + 1))
        x1 = int(rng.integers(0, 4))
        lo = max(0, x1 - height)
        x2 = int(rng.integers(lo, x1 + height + 1))
        if (x2 - x1 - height) % 2:
            x2 += 1 if x2 < x1 + height else -1
        u, v = Point(x1, 0), Point(x2, height)
        # a cap at the limit keeps oversized cases cheap to reject
        paths = _enumerate_capped(u, v, max_paths if max_paths is not None else DEFAULT_CAP)
        if paths:
            break
    region = Region.rectangle(0, height, max(x1, x2) + height)
    spec = WeightSpec.iid(Constant(1.0)) if constant else WeightSpec(_random_law(rng), _random_law(rng))
    env = sample_environment(spec, region, int(rng.integers(0, 2**63)))
    return Instance(u, v, env, paths)


def _enumerate_capped(u, v, cap):
    try:
        return enumerate_paths(u, v, cap=cap)
    except CapExceeded:
        return []


def _random_event(rng: np.random.Generator, inst: Instance, depth: int = 2) -> Event:
    t_lo, t_hi = inst.u.t, inst.v.t
    x_hi = max(inst.u.x, inst.v.x) + (t_hi - t_lo) // 2 + 1

    def primitive() -> Event:
        if rng.random() < 0.5:
            a, b = sorted(int(h) for h in rng.integers(t_lo, t_hi + 1, size=2))
            x = 0 if rng.random() < 0.6 else int(rng.integers(0, x_hi + 1))
            return Avoids(Segment.vertical(a, b, x))
        h = int(rng.integers(t_lo, t_hi + 1))
        a, b = sorted(int(x) for x in rng.integers(0, x_hi + 1, size=2))
        return PositionIn(h, a, b)

    def build(d: int) -> Event:
        if d == 0:
            return primitive()
        k = rng.random()
        if k < 0.3:
            return primitive()
        if k < 0.45:
            return Not(build(d - 1))
        parts = tuple(build(d - 1) for _ in range(2))
        return All(parts) if k < 0.75 else AnyOf(parts)

    return build(depth)


def _brute_probability(inst: Instance, event: Event, h: np.ndarray, mode: Mode) -> float:
    ok = np.array([event.holds(p) for p in inst.paths])
    if mode is Mode.ZERO:
        return float(event.holds(_oracle_geodesic(inst, h)))
    if not ok.any():
        return 0.0
    top = h.max()
    return float(np.exp(h[ok] - top).sum() / np.exp(h - top).sum())


def _oracle_geodesic(inst: Instance, h: np.ndarray) -> DirectedPath:
    best = [p for p, val in zip(inst.paths, h) if val == h.max()]
    pos = np.min(np.stack([p.positions() for p in best]), axis=0)
    return DirectedPath.from_positions(inst.u.t, pos)


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------- checks


def check_free_energies(instances, free_energy_fn: FreeEnergyFn) -> list[CheckResult]:
    worst_f, worst_l, bad_l = 0.0, 0.0, 0
    for inst in instances:
        h = inst.hamiltonians()
        top = h.max()
        exact_f = float(top + math.log(np.exp(h - top).sum()))
        f = free_energy_fn(FreeEnergyQuery(inst.u, inst.v, Mode.POSITIVE), inst.env)
        worst_f = max(worst_f, _rel(f, exact_f))
        l_val = free_energy_fn(FreeEnergyQuery(inst.u, inst.v, Mode.ZERO), inst.env)
        err = abs(l_val - float(top))
        worst_l = max(worst_l, err)
        bad_l += err != 0
    n = len(instances)
    return [CheckResult("free_energy", worst_f <= FREE_ENERGY_TOLERANCE, n, worst_f, "relative error"),
            CheckResult("last_passage", bad_l == 0, n, worst_l, f"{bad_l} inexact")]


def check_geodesics(instances) -> CheckResult:
    bad = 0
    for inst in instances:
        h = inst.hamiltonians()
        mine = leftmost_geodesic(inst.u, inst.v, inst.env)
        bad += not np.array_equal(mine.positions(), _oracle_geodesic(inst, h).positions())
    return CheckResult("leftmost_geodesic", bad == 0, len(instances), float(bad), "mismatches")


def check_events(instances, rng: np.random.Generator, per_instance: int = 3) -> CheckResult:
    worst, cases = 0.0, 0
    for inst in instances:
        h = inst.hamiltonians()
        for _ in range(per_instance):
            event = _random_event(rng, inst)
            for mode in (Mode.POSITIVE, Mode.ZERO):
                got = event_probability(FreeEnergyQuery(inst.u, inst.v, mode), inst.env, event)
                worst = max(worst, abs(got - _brute_probability(inst, event, h, mode)))
                cases += 1
    return CheckResult("event_probability", worst <= EVENT_TOLERANCE, cases, worst, "absolute error")


def _codes(positions: np.ndarray) -> np.ndarray:
    steps = (np.diff(positions, axis=-1) > 0).astype(np.int64)
    return steps @ (np.int64(1) << np.arange(steps.shape[-1], dtype=np.int64))


def check_sampler(rng: np.random.Generator, instances: int = 20, draws: int = 100_000,
                  max_paths: int = 1000) -> CheckResult:
    """Chi-square of exact draws against ``Q``; sparse cells are pooled to expected count >= 5."""
    worst_p, bad = 1.0, 0
    for i in range(instances):
        inst = random_instance(rng, max_paths=max_paths)
        while len(inst.paths) < 2:
            inst = random_instance(rng, max_paths=max_paths)
        h = inst.hamiltonians()
        probs = np.exp(h - h.max())
        probs /= probs.sum()
        index = {int(c): k for k, c in enumerate(_codes(np.stack([p.positions() for p in inst.paths])))}
        drawn = PolymerSampler(inst.u, inst.v, inst.env).positions(rng, draws)
        counts = np.bincount([index[int(c)] for c in _codes(drawn)], minlength=len(inst.paths))
        expected = probs * draws
        order = np.argsort(expected)
        obs, exp, acc_o, acc_e = [], [], 0.0, 0.0
        for k in order:
            acc_o += counts[k]
            acc_e += expected[k]
            if acc_e >= 5:
                obs.append(acc_o)
                exp.append(acc_e)
                acc_o = acc_e = 0.0
        if acc_e > 0:
            if exp:
                obs[-1] += acc_o
                exp[-1] += acc_e
            else:
                obs.append(acc_o)
                exp.append(acc_e)
        if len(exp) < 2:
            continue
        p = float(sps.chisquare(obs, exp).pvalue)
        worst_p = min(worst_p, p)
        bad += p < CHI_SQUARE_LEVEL
    return CheckResult("sampler_chi_square", bad == 0, instances, worst_p, "smallest p-value")


def _coupling_instance(rng: np.random.Generator):
    while True:
        height = int(rng.integers(4, 11))
        x1 = int(rng.integers(0, 3))
        x2 = x1 + 2 * int(rng.integers(0, 3))
        y1 = int(rng.integers(0, 4))
        if (y1 - x1 - height) % 2:
            y1 += 1
        y2 = y1 + 2 * int(rng.integers(0, 3))
        u, v, u2, v2 = Point(x1, 0), Point(y1, height), Point(x2, 0), Point(y2, height)
        if abs(y1 - x1) <= height and abs(y2 - x2) <= height:
            break
    region = Region.rectangle(0, height, max(x2, y2) + height)
    spec = WeightSpec(_random_law(rng), _random_law(rng))
    return u, v, u2, v2, sample_environment(spec, region, int(rng.integers(0, 2**63)))


def _midpoint_law(u, v, env, h: int) -> np.ndarray:
    paths = enumerate_paths(u, v)
    w = np.array([hamiltonian(p, env) for p in paths])
    w = np.exp(w - w.max())
    mids = np.array([p.at(h) for p in paths])
    out = np.zeros(mids.max() + 1)
    np.add.at(out, mids, w / w.sum())
    return out


def check_coupling(rng: np.random.Generator, instances: int = 5, draws: int = 2000) -> list[CheckResult]:
    """Ordering and connected overlap on every draw; midpoint marginals against exact ``Q``."""
    bad_order = bad_conn = 0
    worst_tv = 0.0
    for _ in range(instances):
        u, v, u2, v2, env = _coupling_instance(rng)
        h = v.t // 2
        left_mid, right_mid = [], []
        for _ in range(draws):
            pair = coupled_pair(u, v, u2, v2, env, rng)
            bad_order += not pair.ordered()
            bad_conn += not coalescence_summary(pair).connected
            left_mid.append(pair.left.at(h))
            right_mid.append(pair.right.at(h))
        for ends, mids in (((u, v), left_mid), ((u2, v2), right_mid)):
            exact = _midpoint_law(*ends, env, h)
            emp = stats.histogram(np.array(mids), np.arange(exact.size))
            worst_tv = max(worst_tv, stats.total_variation(emp, exact))
    total = instances * draws
    return [CheckResult("coupling_ordered", bad_order == 0, total, float(bad_order), "violations"),
            CheckResult("coupling_connected", bad_conn == 0, total, float(bad_conn), "violations"),
            CheckResult("coupling_marginals", worst_tv <= TV_LIMIT, instances, worst_tv, "midpoint TV distance")]


# ---------------------------------------------------------------- entry point


def validate_against_oracle(seed: int = 0, instance_count: int = 200, max_height: int = 12,
                            free_energy_fn: FreeEnergyFn | None = None, sampler_instances: int = 20,
                            sampler_draws: int = 100_000, coupling_instances: int = 5,
                            coupling_draws: int = 2000, checks: tuple[str, ...] | None = None) -> OracleReport:
    """Run the equivalence battery; ``free_energy_fn`` substitutes the engine under test.

    ``instance_count=0`` skips every randomized check and yields an empty,
    passing report.  ``checks`` restricts the battery to the named groups
    (``"free_energy"``, ``"geodesic"``, ``"events"``, ``"sampler"``, ``"coupling"``).
    """
    report = OracleReport()
    if instance_count <= 0:
        return report
    wanted = set(checks) if checks is not None else {"free_energy", "geodesic", "events", "sampler", "coupling"}
    fn = free_energy_fn or free_energy
    rng = rng_stream(seed, "oracle")
    instances = [random_instance(rng, max_height) for _ in range(instance_count)]
    ties = [random_instance(rng, max_height, constant=True) for _ in range(max(1, instance_count // 10))]
    if "free_energy" in wanted:
        report.checks += check_free_energies(instances, fn)
    if "geodesic" in wanted:
        report.checks.append(check_geodesics(instances))
        tie = check_geodesics(ties)
        tie.name = "leftmost_geodesic_ties"
        report.checks.append(tie)
    if "events" in wanted:
        report.checks.append(check_events(instances, rng_stream(seed, "oracle", "events")))
    if "sampler" in wanted and sampler_instances > 0:
        report.checks.append(check_sampler(rng_stream(seed, "oracle", "sampler"), sampler_instances, sampler_draws))
    if "coupling" in wanted and coupling_instances > 0:
        report.checks += check_coupling(rng_stream(seed, "oracle", "coupling"), coupling_instances, coupling_draws)
    return report
