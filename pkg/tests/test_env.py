import numpy as np
import pytest
from scipy import stats

from conftest import dense_pi, random_spec, two_state
from mdpsim import (ChainSpec, EnvironmentPath, InvalidEnvironment, InvalidGenerator,
                    NotErgodic, PeriodicEnv, eval_env, realize, reversed_generator,
                    stationary_dist)


def test_symmetric_pi(spec2):
    np.testing.assert_allclose(stationary_dist(spec2), [0.5, 0.5], atol=1e-15)


def test_asymmetric_pi():
    spec = ChainSpec([1.0, 2.0], [[-2.0, 2.0], [1.0, -1.0]], [0.0, 0.0])
    np.testing.assert_allclose(stationary_dist(spec), [1 / 3, 2 / 3], atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_pi_matches_dense_solve(seed):
    spec = random_spec(np.random.default_rng(seed), density=0.6)
    pi = stationary_dist(spec)
    np.testing.assert_allclose(pi, dense_pi(spec.generator), atol=1e-10)
    assert np.abs(pi @ spec.generator).max() <= 1e-12
    assert pi.min() > 0 and abs(pi.sum() - 1) < 1e-14


def test_bad_row_sum_names_row():
    with pytest.raises(InvalidGenerator, match="row 1"):
        ChainSpec([1.0, 2.0], [[-1.0, 1.0], [1.0, -2.0]], [0.0, 0.0])


@pytest.mark.parametrize("states, gen", [
    ([1.0], [[0.0]]),
    ([0.0, 1.0], [[-1, 1], [1, -1]]),
    ([1.0, 1.0], [[-1, 1], [1, -1]]),
    ([1.0, 2.0], [[1, -1], [1, -1]]),
])
def test_invalid_generators(states, gen):
    with pytest.raises(InvalidGenerator):
        ChainSpec(states, gen, [0.0] * len(states))


def test_unreachable_state_not_ergodic():
    with pytest.raises(NotErgodic):
        ChainSpec([1.0, 2.0], [[0.0, 0.0], [1.0, -1.0]], [0.0, 0.0])


def test_reversed_generator_balance():
    spec = random_spec(np.random.default_rng(3))
    pi = stationary_dist(spec)
    rev = reversed_generator(spec)
    np.testing.assert_allclose(pi[:, None] * rev, (pi[:, None] * spec.generator).T, atol=1e-14)
    np.testing.assert_allclose(rev.sum(axis=1), 0.0, atol=1e-12)


def test_same_seed_same_skeleton(spec2):
    a, b = realize(spec2, 42), realize(spec2, 42)
    a.extend_to(-50, 50)
    b.extend_to(-50, 50)
    for x, y in zip(a.skeleton(), b.skeleton()):
        np.testing.assert_array_equal(x, y)
    c = realize(spec2, 43)
    c.extend_to(-50, 50)
    assert not np.array_equal(a.skeleton()[0][:5], c.skeleton()[0][:5])


def test_skeleton_independent_of_extension_order(spec2):
    a, b = realize(spec2, 5), realize(spec2, 5)
    a.extend_to(-200, 200)
    for hi in (3, 40, 200):
        b.extend_to(0, hi)
    b.extend_to(-200, 0)
    ea, sa = a.skeleton()
    eb, sb = b.skeleton()
    lo, hi = max(ea[0], eb[0]), min(ea[-1], eb[-1])
    ka, kb = (ea >= lo) & (ea <= hi), (eb >= lo) & (eb <= hi)
    np.testing.assert_array_equal(ea[ka], eb[kb])


def test_right_continuity(spec2):
    path = realize(spec2, 1)
    path.extend_to(-10, 10)
    edges, states = path.skeleton()
    k = np.searchsorted(edges, 0.0) + 2
    i, sigma, b = eval_env(path, edges[k])
    assert i == states[k]
    assert sigma == spec2.states[i] and b == spec2.observable[i]
    assert eval_env(path, np.nextafter(edges[k], -np.inf))[0] == states[k - 1]


def test_lookup_stable_under_extension(spec2):
    path = realize(spec2, 8)
    u = np.linspace(-5, 5, 101)
    before = path.state_index(u)
    eval_env(path, 1e4)
    eval_env(path, -1e4)
    lo, hi = path.realized_range
    assert lo <= -1e4 and hi >= 1e4
    np.testing.assert_array_equal(path.state_index(u), before)


def test_forward_segment_lengths_exponential():
    spec = ChainSpec([1.0, 2.0, -1.5], [[-1.0, 0.5, 0.5], [2.0, -3.0, 1.0], [0.2, 0.3, -0.5]],
                     [0.0, 1.0, 2.0])
    path = realize(spec, 11)
    while True:
        edges, states = path.skeleton()
        k0 = np.searchsorted(edges, 0.0, side="right")
        fwd = states[k0:]
        if min(np.sum(fwd == i) for i in range(3)) >= 10_000:
            break
        path.extend_to(0.0, 2 * path.realized_range[1])
    lengths = np.diff(edges)[k0:]
    for i in range(3):
        sample = lengths[fwd == i][:10_000]
        rate = -spec.generator[i, i]
        assert stats.kstest(sample, "expon", args=(0, 1 / rate)).pvalue > 0.01


def test_occupation_fractions():
    spec = ChainSpec([1.0, 2.0], [[-2.0, 2.0], [1.0, -1.0]], [0.0, 0.0])
    L = 1e4 / 1.0
    n_paths = 40
    frac = np.empty(n_paths)
    for s in range(n_paths):
        path = realize(spec, s)
        path.extend_to(0.0, L)
        edges, states = path.skeleton()
        e = np.clip(edges, 0.0, L)
        frac[s] = np.sum(np.diff(e) * (states == 0)) / L
    se = frac.std(ddof=1) / np.sqrt(n_paths)
    assert abs(frac.mean() - 1 / 3) <= 3 * se


def test_two_sided_stationarity():
    spec = ChainSpec([1.0, 2.0, 3.0], [[-1.0, 1.0, 0.0], [0.0, -2.0, 2.0], [3.0, 0.0, -3.0]],
                     [0.0, 0.0, 0.0])
    pi = stationary_dist(spec)
    n = 10_000
    counts = np.bincount([realize(spec, s).state_index(-2.5) for s in range(n)], minlength=3)
    assert stats.chisquare(counts, n * pi).pvalue > 0.01


def test_periodic_constructors():
    env = PeriodicEnv.piecewise([0.5], [1.0, 2.0], [0.3, -0.3], resolution=8)
    sig, b = env.lookup(np.array([0.1, 0.6, 1.1, -0.2]))
    np.testing.assert_array_equal(sig, [1.0, 2.0, 1.0, 2.0])
    np.testing.assert_array_equal(b, [0.3, -0.3, 0.3, -0.3])
    with pytest.raises(InvalidEnvironment):
        PeriodicEnv(np.array([1.0, 0.0]), np.array([0.0, 0.0]))


def test_environment_path_rejects_spec_type():
    with pytest.raises(Exception):
        EnvironmentPath("not a spec", 0)
