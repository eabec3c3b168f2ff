import numpy as np
import pytest

from mdpsim import ChainSpec


def two_state(rate=1.0):
    """States (1, 2), drift values (1, 0), symmetric switching."""
    return ChainSpec([1.0, 2.0], [[-rate, rate], [rate, -rate]], [1.0, 0.0])


def random_spec(rng, m=5, density=1.0):
    """Random irreducible spec; a ring of positive rates guarantees irreducibility."""
    lam = rng.uniform(0.1, 2.0, (m, m)) * (rng.random((m, m)) < density)
    for i in range(m):
        lam[i, (i + 1) % m] = rng.uniform(0.5, 2.0)
    np.fill_diagonal(lam, 0.0)
    np.fill_diagonal(lam, -lam.sum(axis=1))
    states = rng.uniform(0.5, 3.0, m) * rng.choice([-1.0, 1.0], m)
    while np.unique(states).size < m:
        states = rng.uniform(0.5, 3.0, m)
    return ChainSpec(states, lam, rng.normal(size=m))


def dense_pi(lam):
    """Stationary law from a square solve: replace one balance equation by normalization."""
    m = lam.shape[0]
    A = lam.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    return np.linalg.solve(A, rhs)


@pytest.fixture
def spec2():
    return two_state()
