from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from polymer_lab.engine import Geometry, event_probability, free_energy, query
from polymer_lab.environment import BOUND_PHASE, Environment, Gamma, Region, WeightSpec, bulk_view, sample_environment
from polymer_lab.events import All, Not, PositionIn, avoids_wall
from polymer_lab.lattice import count_paths, enumerate_paths, hamiltonian
from polymer_lab.sampling import rng_stream, sample_polymer

SETTINGS = settings(max_examples=40, deadline=None)
seeds = st.integers(0, 2**63 - 1)
half_heights = st.integers(1, 8)


def _env(seed, n, width=None, spec=BOUND_PHASE):
    return sample_environment(spec, Region.rectangle(0, n, width if width is not None else n + 2), seed)


def _perturbed(env, rng, scale):
    """Explicit copy of ``env`` with every weight shifted by up to ``scale`` (kept positive)."""
    region = env.region
    values = {}
    for t in range(region.t_min, region.t_max + 1):
        lo, hi = region.bounds(t)
        for x in range(lo, hi + 1):
            values[(x, t)] = max(env.weight(x, t) + float(rng.uniform(-scale, scale)), 1e-6)
    return Environment.from_function(lambda x, t: values[(x, t)], region), values


@SETTINGS
@given(seeds, half_heights, st.floats(0.0, 3.0))
def test_monotone_in_weights(seed, h, bump):
    n = 2 * h
    env = _env(seed, n)
    shifted = Environment.from_function(lambda x, t: env.weight(x, t) + bump * ((x + t) % 2), env.region)
    for mode in ("positive", "zero"):
        q = query((0, 0), (0, n), mode)
        assert free_energy(q, shifted) >= free_energy(q, env) - 1e-12


@SETTINGS
@given(seeds, half_heights, st.floats(0.01, 2.0))
def test_lipschitz_in_sup_norm(seed, h, scale):
    n = 2 * h
    env = _env(seed, n)
    other, values = _perturbed(env, np.random.default_rng(seed % 1000), scale)
    sup = max(abs(values[k] - env.weight(*k)) for k in values)
    for mode in ("positive", "zero"):
        q = query((0, 0), (0, n), mode)
        assert abs(free_energy(q, other) - free_energy(q, env)) <= (n + 1) * sup + 1e-9


@SETTINGS
@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_superadditivity(seed, a, b):
    m, n = 2 * a, 2 * (a + b)
    env = _env(seed, n)
    for mode in ("positive", "zero"):
        whole = free_energy(query((0, 0), (0, n), mode), env)
        parts = free_energy(query((0, 0), (0, m), mode), env) + free_energy(query((0, m), (0, n), mode), env)
        assert whole >= parts - env.weight(0, m) - 1e-9


@SETTINGS
@given(seeds, half_heights, st.integers(0, 3))
def test_zero_temperature_sandwich(seed, h, x):
    n = 2 * h + (x % 2)
    env = _env(seed, n, n + 4)
    L = free_energy(query((0, 0), (x, n), "zero"), env)
    F = free_energy(query((0, 0), (x, n)), env)
    assert L - 1e-12 <= F <= L + math.log(count_paths((0, 0), (x, n))) + 1e-9


@SETTINGS
@given(seeds, half_heights)
def test_half_space_below_full_space(seed, h):
    n = 2 * h
    base = sample_environment(BOUND_PHASE, Region.rectangle(-n, n, n, x_min=-n), seed)
    view = bulk_view(base, seed ^ 0x5A5A)
    for mode in ("positive", "zero"):
        half = free_energy(query((0, 0), (0, n), mode), view)
        full = free_energy(query((0, 0), (0, n), mode, Geometry.FULL), view)
        assert full >= half - 1e-12


@SETTINGS
@given(seeds, st.integers(2, 8), st.data())
def test_partition_probabilities_sum_to_one(seed, h, data):
    n = 2 * h
    env = _env(seed, n)
    t1 = data.draw(st.integers(1, n - 1))
    t2 = data.draw(st.integers(t1, n - 1))
    s = data.draw(st.integers(1, n - 1))
    a = avoids_wall(t1, t2)
    b = PositionIn(s, 0, data.draw(st.integers(0, 3)))
    parts = (All((a, b)), All((a, Not(b))), All((Not(a), b)), All((Not(a), Not(b))))
    q = query((0, 0), (0, n))
    probs = [event_probability(q, env, e) for e in parts]
    assert all(-1e-12 <= p <= 1 + 1e-12 for p in probs)
    assert math.isclose(sum(probs), 1.0, abs_tol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 10))
def test_enumeration_count(x1, x2, n):
    n = max(n, abs(x2 - x1), 1)
    n += (x2 - x1 + n) % 2  # parity
    paths = list(enumerate_paths((x1, 0), (x2, n)))
    assert len(paths) == count_paths((x1, 0), (x2, n))
    assert len({tuple(p.positions()) for p in paths}) == len(paths)
    assert all(p.positions().min() >= 0 for p in paths)


@SETTINGS
@given(seeds, half_heights, st.integers(0, 1000))
def test_log_density_consistency(seed, h, draw):
    n = 2 * h
    spec = WeightSpec(Gamma(2.0, 1.0), Gamma(0.5, 2.0))
    env = _env(seed, n, spec=spec)
    s = sample_polymer((0, 0), (0, n), env, rng_stream(seed, "prop", draw))
    f = free_energy(query((0, 0), (0, n)), env)
    assert s.log_density <= 1e-12
    assert math.isclose(s.log_density, hamiltonian(s.path, env) - f, abs_tol=1e-9)


@SETTINGS
@given(seeds, st.integers(0, 50))
def test_environment_is_a_function_of_the_seed(seed, t):
    region = Region.cone((0, 0), (0, 100))
    a = sample_environment(BOUND_PHASE, region, seed)
    b = sample_environment(BOUND_PHASE, Region.cone((0, 0), (0, 200)), seed)
    lo, hi = region.bounds(t)
    assert np.array_equal(a.row(t, lo, hi), b.row(t, lo, hi))
