"""Poisson decomposition along environment paths and exponential tail bounds.

Along a piecewise-constant path every term of

    int_0^t f(sigma(s)) ds = V_t - V_0 - M_t

is available in closed form between jumps, so the decomposition is built
exactly on the jump skeleton. The martingale is also rebuilt independently
as ``M = h . N`` with ``N_t = I(t) - I(0) - Lambda^T int_0^t I(s) ds`` to
check the identity numerically.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng as _rng
from .chain_algebra import solve_poisson
from .env import EnvironmentPath, realize, stationary_dist
from .errors import InvalidQuery
from .parallel import run_replicas


@dataclass
class DecompositionSample:
    """Decomposition evaluated at the event times of one environment path.

    ``times`` holds 0, the jump positions inside ``(0, U)`` and ``U``.
    Values are right limits; ``M_left`` holds left limits at the same times.
    """

    times: np.ndarray
    states: np.ndarray
    integral: np.ndarray
    V: np.ndarray
    M: np.ndarray
    M_left: np.ndarray
    qv: np.ndarray
    M_from_N: np.ndarray
    jumps: np.ndarray
    f_seg: np.ndarray = field(default=None, repr=False)
    m_seg: np.ndarray = field(default=None, repr=False)

    @property
    def sup_abs_M(self):
        return float(max(np.abs(self.M).max(), np.abs(self.M_left).max()))

    @property
    def bracket(self):
        """Realized quadratic variation ``[M]_U``: the sum of squared jumps."""
        return float(np.sum(self.jumps**2))

    def identity_residual(self):
        """Relative mismatch between the integral and ``V_t - V_0 - h.N_t``."""
        rhs = self.V - self.V[0] - self.M_from_N
        scale = max(1.0, float(np.abs(self.integral).max()))
        return float(np.abs(self.integral - rhs).max() / scale)

    def at(self, t):
        """Right-continuous values ``(integral, V, M, qv)`` at arbitrary times."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 1)
        dt = t - self.times[k]
        integral = self.integral[k] + dt * self.f_seg[k]
        qv = self.qv[k] + dt * self.m_seg[k]
        V = self.V[k]
        return integral, V, V - self.V[0] - integral, qv


def _segments(path, U):
    path.extend_to(0.0, U)
    edges, states = path.skeleton()
    k0 = np.searchsorted(edges, 0.0, side="right") - 1
    k1 = np.searchsorted(edges, U, side="left")
    inner = edges[k0 + 1:k1]
    times = np.concatenate([[0.0], inner, [U]])
    seg_states = states[k0:k0 + times.size - 1]
    return times, seg_states


def _build(times, seg, dec, lam_h):
    h, f, m = dec.h, dec.f, dec.m
    lengths = np.diff(times)
    integral = np.concatenate([[0.0], np.cumsum(f[seg] * lengths)])
    qv = np.concatenate([[0.0], np.cumsum(m[seg] * lengths)])
    # state right after each event time; the last segment continues to U
    after = np.concatenate([seg, seg[-1:]])
    before = np.concatenate([seg[:1], seg])
    V = h[after]
    V_left = h[before]
    M = V - V[0] - integral
    M_left = V_left - V[0] - integral
    # independent route: M = h . N with the compensator from Lambda^T
    comp = np.concatenate([[0.0], np.cumsum(lam_h[seg] * lengths)])
    M_from_N = V - V[0] - comp
    jumps = V[1:-1] - V_left[1:-1]
    return integral, V, M, M_left, qv, M_from_N, jumps


def sample_decomposition(spec, f, U, seed, decomposition=None, path=None):
    """Exact decomposition of ``int_0^t f(sigma(s)) ds`` on ``[0, U]``."""
    if not U > 0:
        raise InvalidQuery("horizon U must be positive")
    dec = decomposition or solve_poisson(spec, f)
    path = path or realize(spec, seed)
    times, seg = _segments(path, U)
    lam_h = spec.generator @ dec.h
    integral, V, M, M_left, qv, M_N, jumps = _build(times, seg, dec, lam_h)
    last = np.concatenate([seg, seg[-1:]])
    return DecompositionSample(times, seg, integral, V, M, M_left, qv, M_N, jumps,
                               f_seg=dec.f[last], m_seg=dec.m[last])


def _check(r, q, K=0.0):
    for name, v in (("r", r), ("q", q)):
        if not (np.isfinite(v) and v > 0):
            raise InvalidQuery(f"{name} must be positive and finite, got {v}")
    if not (np.isfinite(K) and K >= 0):
        raise InvalidQuery(f"K must be nonnegative, got {K}")


def bound_continuous(r, q):
    """``min(1, 2 exp(-r^2 / (2 q)))`` for continuous martingales."""
    _check(r, q)
    return min(1.0, 2.0 * np.exp(-r * r / (2.0 * q)))


def bound_jump(r, q, K):
    """``min(1, 2 exp(-r^2 / (2 (K r + q))))`` for jumps bounded by ``K``."""
    _check(r, q, K)
    return min(1.0, 2.0 * np.exp(-r * r / (2.0 * (K * r + q))))


def clopper_pearson(k, n, level=0.99):
    """One-sided ``(lower, upper)`` confidence limits for a binomial rate."""
    alpha = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1.0 - alpha, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class TailResult:
    r: float
    q: float
    K: float
    n: int
    count: int
    freq: float
    lcl99: float
    ucl99: float
    bound: float
    violated: bool


def tail_samples(spec, f, U, n_replicas, seed, threads=None, decomposition=None):
    """``(sup_t |M_t|, <M>_U)`` for independent environment paths."""
    dec = decomposition or solve_poisson(spec, f)
    pi = stationary_dist(spec)
    lam_h = spec.generator @ dec.h

    def one(i):
        path = EnvironmentPath(spec, _rng.subkey(seed, i), pi=pi)
        times, seg = _segments(path, U)
        _, _, M, M_left, qv, _, _ = _build(times, seg, dec, lam_h)
        return max(np.abs(M).max(), np.abs(M_left).max()), qv[-1]

    res = np.array(run_replicas(one, n_replicas, threads))
    return res[:, 0], res[:, 1]


def tail_table(spec, f, U, rs, qs, n_replicas, seed, threads=None):
    """Empirical frequency against the jump bound on an ``(r, q)`` grid.

    All cells share the same replicas.
    """
    dec = solve_poisson(spec, f)
    sup_m, qv = tail_samples(spec, f, U, n_replicas, seed, threads, dec)
    rows = []
    for r in rs:
        for q in qs:
            k = int(np.sum((sup_m >= r) & (qv <= q)))
            lo, hi = clopper_pearson(k, n_replicas)
            bound = bound_jump(r, q, dec.K)
            rows.append(TailResult(float(r), float(q), dec.K, n_replicas, k,
                                   k / n_replicas, lo, hi, bound, lo > bound))
    return rows


def empirical_tail(spec, f, U, r, q, n_replicas, seed, threads=None):
    """Monte Carlo frequency of ``{sup |M| >= r, <M>_U <= q}`` and its bound.

    ``violated`` is set only when the 99% lower confidence limit of the
    frequency exceeds the bound.
    """
    return tail_table(spec, f, U, [r], [q], n_replicas, seed, threads)[0]


@dataclass(frozen=True)
class DecompositionCheck:
    n: int
    U: float
    K: float
    max_identity_residual: float
    max_jump: float
    mean_M: float
    mean_M_se: float
    var_M_over_U: float
    var_se: float
    qv_rate: float

    @property
    def identity_ok(self):
        return self.max_identity_residual <= 1e-10

    @property
    def jumps_ok(self):
        return self.max_jump <= self.K + 1e-12

    @property
    def qv_ok(self):
        return abs(self.var_M_over_U - self.qv_rate) <= 3.0 * self.var_se

    @property
    def ok(self):
        return self.identity_ok and self.jumps_ok and self.qv_ok


def verify_decomposition(spec, f, U, n_replicas, seed, threads=None):
    """Decomposition residuals and the variance of ``M_U`` over many paths.

    ``Var(M_U) / U`` is compared with the mean quadratic-variation rate
    ``sum pi_i m_i``; its standard error uses the sample fourth moment.
    """
    dec = solve_poisson(spec, f)

    def one(i):
        s = sample_decomposition(spec, f, U, _rng.subkey(seed, i), decomposition=dec)
        jump = float(np.abs(s.jumps).max()) if s.jumps.size else 0.0
        return s.M[-1], s.identity_residual(), jump

    res = np.array(run_replicas(one, n_replicas, threads))
    mU = res[:, 0]
    c = mU - mU.mean()
    var = float(np.mean(c**2) * n_replicas / (n_replicas - 1))
    m4 = float(np.mean(c**4))
    var_se = float(np.sqrt(max(m4 - var**2, 0.0) / n_replicas))
    return DecompositionCheck(
        n=n_replicas, U=float(U), K=dec.K,
        max_identity_residual=float(res[:, 1].max()), max_jump=float(res[:, 2].max()),
        mean_M=float(mU.mean()), mean_M_se=float(mU.std(ddof=1) / np.sqrt(n_replicas)),
        var_M_over_U=var / U, var_se=var_se / U, qv_rate=dec.mean_qv_rate,
    )
