"""Random and periodic environments indexed by the spatial coordinate.

A random environment is a stationary ergodic Markov chain ``sigma(u)``,
``u`` in R, on a finite alphabet ``a_1..a_m`` with generator ``Lambda``; the
drift is ``b(u) = g(sigma(u))``. A periodic environment is a pair of
period-1 functions tabulated on a uniform grid.
"""

from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.sparse.csgraph import connected_components

from . import rng as _rng
from .errors import InvalidEnvironment, InvalidGenerator, NotErgodic

ROW_SUM_TOL = 1e-12
DEFAULT_RESOLUTION = 2**12


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Law of a finite-state environment chain.

    Parameters
    ----------
    states : (m,) array_like
        Alphabet values ``a_i``; nonzero and pairwise distinct.
    generator : (m, m) array_like
        Transition intensities, rows summing to zero.
    observable : (m,) array_like
        Drift values ``g(a_i)``.
    """

    states: np.ndarray
    generator: np.ndarray
    observable: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.states, dtype=float).ravel()
        lam = np.asarray(self.generator, dtype=float)
        g = np.asarray(self.observable, dtype=float).ravel()
        m = a.size
        if m < 2:
            raise InvalidGenerator("need at least two states")
        if lam.shape != (m, m):
            raise InvalidGenerator(f"generator must be {m}x{m}, got {lam.shape}")
        if g.size != m:
            raise InvalidGenerator(f"observable must have {m} entries, got {g.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(lam)) and np.all(np.isfinite(g))):
            raise InvalidGenerator("non-finite entries")
        if np.any(a == 0):
            raise InvalidGenerator("alphabet values must be nonzero")
        if np.unique(a).size != m:
            raise InvalidGenerator("alphabet values must be pairwise distinct")
        off = lam - np.diag(np.diag(lam))
        bad = np.argwhere(off < 0)
        if bad.size:
            i, j = bad[0]
            raise InvalidGenerator(f"row {i}: negative off-diagonal entry at column {j}")
        scale = max(1.0, float(np.abs(lam).max()))
        sums = lam.sum(axis=1)
        for i, s in enumerate(sums):
            if abs(s) > ROW_SUM_TOL * scale:
                raise InvalidGenerator(f"row {i} sums to {s:.3g}, not 0")
        n_comp, _ = connected_components(off > 0, directed=True, connection="strong")
        if n_comp != 1:
            raise NotErgodic(f"generator is reducible ({n_comp} communicating classes)")
        for name, val in (("states", a), ("generator", lam), ("observable", g)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def m(self):
        return self.states.size

    @property
    def jump_rates(self):
        """Holding rates ``-Lambda_ii``."""
        return -np.diag(self.generator)

    def permuted(self, perm):
        """Same chain with state labels reordered by ``perm``."""
        perm = np.asarray(perm)
        return ChainSpec(self.states[perm], self.generator[np.ix_(perm, perm)],
                         self.observable[perm])


def stationary_dist(spec):
    """Invariant distribution ``pi`` with ``pi @ Lambda = 0``.

    Solved as the least-squares problem ``[Lambda^T; 1^T] pi = [0; 1]``.
    """
    lam = spec.generator
    m = spec.m
    aug = np.vstack([lam.T, np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    # one step of iterative refinement
    corr, *_ = np.linalg.lstsq(aug, rhs - aug @ pi, rcond=None)
    pi = pi + corr
    if np.any(pi <= 0):
        raise NotErgodic("invariant distribution is not strictly positive")
    return pi / pi.sum()


def reversed_generator(spec, pi=None):
    """Time-reversed generator ``pi_j Lambda_ji / pi_i``."""
    if pi is None:
        pi = stationary_dist(spec)
    return spec.generator.T * pi[None, :] / pi[:, None]


def _jump_cdf(lam):
    q = -np.diag(lam)
    p = lam / q[:, None]
    np.fill_diagonal(p, 0.0)
    cdf = np.cumsum(p, axis=1)
    cdf[:, -1] = 1.0
    return cdf


@nb.njit(cache=True)
def _walk(start, cdf, u):
    n = u.shape[0]
    out = np.empty(n, dtype=np.int64)
    s = start
    m = cdf.shape[1]
    for k in range(n):
        j = 0
        while j < m - 1 and cdf[s, j] <= u[k]:
            j += 1
        s = j
        out[k] = s
    return out


class EnvironmentPath:
    """One two-sided realization of the environment chain.

    Segments are half-open ``[edges[k], edges[k+1])`` so the path is right
    continuous. The skeleton is materialized lazily and only ever appended
    to; each side draws from its own stream, two uniforms per segment, so
    the realized skeleton does not depend on the order of extension.
    """

    def __init__(self, spec, seed, pi=None):
        self.spec = spec
        self.pi = stationary_dist(spec) if pi is None else np.asarray(pi)
        self._q = spec.jump_rates
        self._cdf_fwd = _jump_cdf(spec.generator)
        self._cdf_bwd = _jump_cdf(reversed_generator(spec, self.pi))
        if isinstance(seed, np.random.Generator):
            seed = int(seed.integers(2**62))
        self.seed = seed
        init = _rng.stream(seed, _rng.ENV, 0)
        self._fwd_rng = _rng.stream(seed, _rng.ENV, 1)
        self._bwd_rng = _rng.stream(seed, _rng.ENV, 2)
        u0 = init.random()
        s0 = int(np.searchsorted(np.cumsum(self.pi), u0, side="right"))
        s0 = min(s0, spec.m - 1)
        # forward residual and backward age of the segment holding 0
        res = -np.log1p(-self._fwd_rng.random()) / self._q[s0]
        age = -np.log1p(-self._bwd_rng.random()) / self._q[s0]
        self._fwd_edges = [np.array([res])]
        self._fwd_states = [np.empty(0, dtype=np.int64)]
        self._bwd_edges = [np.array([-age])]
        self._bwd_states = [np.empty(0, dtype=np.int64)]
        self._s0 = s0
        self._fwd_last = (s0, res)
        self._bwd_last = (s0, -age)
        self._chunk_f = 64
        self._chunk_b = 64
        self._cache = None

    # -- materialization -------------------------------------------------
    def _grow_forward(self):
        n = self._chunk_f
        u = self._fwd_rng.random((n, 2))
        s, e = self._fwd_last
        states = _walk(s, self._cdf_fwd, u[:, 1])
        lengths = -np.log1p(-u[:, 0]) / self._q[states]
        edges = e + np.cumsum(lengths)
        self._fwd_states.append(states)
        self._fwd_edges.append(edges)
        self._fwd_last = (int(states[-1]), float(edges[-1]))
        self._chunk_f = min(2 * n, 1 << 16)
        self._cache = None

    def _grow_backward(self):
        n = self._chunk_b
        u = self._bwd_rng.random((n, 2))
        s, e = self._bwd_last
        states = _walk(s, self._cdf_bwd, u[:, 1])
        lengths = -np.log1p(-u[:, 0]) / self._q[states]
        edges = e - np.cumsum(lengths)
        self._bwd_states.append(states)
        self._bwd_edges.append(edges)
        self._bwd_last = (int(states[-1]), float(edges[-1]))
        self._chunk_b = min(2 * n, 1 << 16)
        self._cache = None

    def extend_to(self, u_min, u_max):
        """Materialize segments until ``[u_min, u_max]`` is covered."""
        while self._fwd_last[1] <= u_max:
            self._grow_forward()
        while self._bwd_last[1] > u_min:
            self._grow_backward()
        return self

    @property
    def realized_range(self):
        return self._bwd_last[1], self._fwd_last[1]

    def skeleton(self):
        """``(edges, states)`` of everything realized so far.

        ``edges`` has one more entry than ``states``; state ``states[k]``
        occupies ``[edges[k], edges[k+1])``.
        """
        if self._cache is None:
            bwd_e = np.concatenate(self._bwd_edges)
            bwd_s = np.concatenate(self._bwd_states)
            fwd_e = np.concatenate(self._fwd_edges)
            fwd_s = np.concatenate(self._fwd_states)
            edges = np.concatenate([bwd_e[::-1], fwd_e])
            states = np.concatenate([bwd_s[::-1], [self._s0], fwd_s]).astype(np.int64)
            self._cache = (edges, states)
        return self._cache

    def segment_arrays(self):
        """``(edges, sigma, b)`` per segment, as consumed by the kernels."""
        edges, states = self.skeleton()
        return edges, self.spec.states[states], self.spec.observable[states]

    def state_index(self, u):
        """Vectorized state lookup; extends the path as needed."""
        u = np.asarray(u, dtype=float)
        if u.size:
            self.extend_to(float(u.min()), float(u.max()))
        edges, states = self.skeleton()
        k = np.searchsorted(edges, u, side="right") - 1
        return states[k]

    def __call__(self, u):
        return eval_env(self, u)


def realize(spec, seed):
    """Draw a stationary two-sided environment path.

    ``sigma(0)`` is drawn from the invariant law, forward segments from the
    embedded chain of ``Lambda`` and backward segments from the reversed
    generator, so the whole path is stationary.
    """
    return EnvironmentPath(spec, seed)


def eval_env(path, u):
    """Return ``(state index, sigma, b)`` at position ``u``."""
    i = int(path.state_index(np.array([u]))[0])
    return i, float(path.spec.states[i]), float(path.spec.observable[i])


@dataclass(eq=False)
class PeriodicEnv:
    """Period-1 environment tabulated at cell midpoints.

    ``sigma[k]`` and ``b[k]`` hold the values on ``[k/N, (k+1)/N)``. When
    built from callables the callables are kept so the quadrature error can
    be estimated at other resolutions.
    """

    sigma: np.ndarray
    b: np.ndarray
    sigma_fn: object = field(default=None, repr=False)
    b_fn: object = field(default=None, repr=False)

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.sigma.shape != self.b.shape or self.sigma.size == 0:
            raise InvalidEnvironment("sigma and b tables must have equal nonzero length")
        if not np.all(np.isfinite(self.sigma)) or not np.all(np.isfinite(self.b)):
            raise InvalidEnvironment("non-finite table entries")
        if np.min(self.sigma**2) <= 0:
            k = int(np.argmin(self.sigma**2))
            raise InvalidEnvironment(f"sigma^2 is not positive at grid point {k}")

    @property
    def resolution(self):
        return self.sigma.size

    @classmethod
    def from_functions(cls, sigma_fn, b_fn, resolution=DEFAULT_RESOLUTION):
        s = (np.arange(resolution) + 0.5) / resolution
        return cls(np.broadcast_to(sigma_fn(s), s.shape).copy(),
                   np.broadcast_to(b_fn(s), s.shape).copy(), sigma_fn, b_fn)

    @classmethod
    def constant(cls, sigma, b=0.0):
        return cls.from_functions(lambda s: np.full_like(s, sigma),
                                  lambda s: np.full_like(s, b), resolution=1)

    @classmethod
    def piecewise(cls, breaks, sigma, b, resolution=DEFAULT_RESOLUTION):
        """Piecewise-constant environment.

        ``breaks`` are the interior breakpoints in (0, 1); value ``k``
        applies on ``[breaks[k-1], breaks[k])``.
        """
        breaks = np.asarray(breaks, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        b = np.asarray(b, dtype=float)
        if sigma.size != breaks.size + 1 or b.size != breaks.size + 1:
            raise InvalidEnvironment("need len(breaks)+1 values")

        def pick(vals):
            return lambda s: vals[np.searchsorted(breaks, np.asarray(s) % 1.0, side="right")]

        return cls.from_functions(pick(sigma), pick(b), resolution)

    def lookup(self, u):
        """Vectorized ``(sigma, b)`` at positions ``u``."""
        u = np.asarray(u, dtype=float)
        k = np.floor((u - np.floor(u)) * self.resolution).astype(np.int64)
        k = np.minimum(k, self.resolution - 1)
        return self.sigma[k], self.b[k]

    def tables_at(self, resolution):
        """Tables at another resolution (needs the source callables)."""
        if self.sigma_fn is None:
            if resolution * 2 != self.resolution:
                raise InvalidEnvironment("no source functions to re-tabulate from")
            # every other node; cruder than a true coarse midpoint rule
            return self.sigma[0::2], self.b[0::2]
        s = (np.arange(resolution) + 0.5) / resolution
        return (np.broadcast_to(self.sigma_fn(s), s.shape).astype(float),
                np.broadcast_to(self.b_fn(s), s.shape).astype(float))
