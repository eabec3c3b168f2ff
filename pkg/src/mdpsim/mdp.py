"""Rate function, tube-exit rates and epsilon-scans of deviation probabilities.

The limit rate function is

    J(u) = 1/(2 a_eff) int_0^T (u'(t) - b_eff)^2 dt,   u(0) = x0,

so leaving the tube ``sup_t |u_t - x0 - b_eff t| >= eta`` costs
``eta^2 / (2 a_eff T)``. Scans estimate the matching probabilities for
finite epsilon and report ``-eps^{2 kappa} log p``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .env import ChainSpec, EnvironmentPath
from .errors import InvalidPath, InvalidQuery
from .homogenize import homogenize
from .sde import SimulationParams, euler_ensemble


@dataclass(frozen=True)
class RatePath:
    """Continuous piecewise-linear path through ``(times[j], values[j])``."""

    times: np.ndarray
    values: np.ndarray
    x0: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != u.shape or t.size < 2:
            raise InvalidPath("times and values must be 1-D of equal length >= 2")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(u))):
            raise InvalidPath("non-finite breakpoints")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise InvalidPath("breakpoints must start at 0 and increase strictly")
        if u[0] != self.x0:
            raise InvalidPath(f"path starts at {u[0]}, not at x0={self.x0}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", u)

    @property
    def T(self):
        return float(self.times[-1])

    @property
    def slopes(self):
        return np.diff(self.values) / np.diff(self.times)

    @classmethod
    def from_function(cls, fn, T, n, x0):
        t = np.linspace(0.0, T, n + 1)
        u = np.asarray(fn(t), dtype=float)
        u[0] = x0
        return cls(t, u, x0)


def rate_J(path, coeffs):
    """Exact rate of a piecewise-linear path (a finite sum of segment terms)."""
    dt = np.diff(path.times)
    return float(np.sum((path.slopes - coeffs.b_eff) ** 2 * dt) / (2.0 * coeffs.a_eff))


def tube_exit_rate(eta, T, coeffs):
    """Cheapest way out of the eta-tube around the nominal line: ``eta^2/(2 a T)``."""
    if not (eta > 0 and T > 0):
        raise InvalidQuery("eta and T must be positive")
    return eta * eta / (2.0 * coeffs.a_eff * T)


def tube_exit_oracle(eta, T, coeffs, n=100):
    """Minimize the discretized rate over paths touching ``+-eta`` somewhere.

    For each grid node and sign the equality-constrained quadratic program
    is solved through its KKT system; the smallest value is returned.
    """
    if not (eta > 0 and T > 0):
        raise InvalidQuery("eta and T must be positive")
    a, b = coeffs.a_eff, coeffs.b_eff
    h = T / n
    t = np.linspace(0.0, T, n + 1)
    # unknowns: deviations d_1..d_n from the nominal line (d_0 = 0);
    # rate = 1/(2a) sum (d_j - d_{j-1})^2 / h, the b-terms cancel exactly
    D = np.zeros((n, n))
    for j in range(n):
        D[j, j] = 1.0
        if j:
            D[j, j - 1] = -1.0
    H = D.T @ D / (a * h)
    best = math.inf
    for k in range(n):
        for sign in (1.0, -1.0):
            kkt = np.zeros((n + 1, n + 1))
            kkt[:n, :n] = H
            kkt[:n, n] = kkt[n, :n] = 0.0
            kkt[k, n] = kkt[n, k] = 1.0
            rhs = np.zeros(n + 1)
            rhs[n] = sign * eta
            sol = np.linalg.solve(kkt, rhs)
            d = sol[:n]
            u = np.concatenate([[0.0], d]) + b * t
            val = float(np.sum((np.diff(u) / h - b) ** 2) * h / (2.0 * a))
            best = min(best, val)
    return best


def gaussian_tube_exit_prob(eta, T, s, terms=50):
    """``P(sup_{t<=T} |s W_t| >= eta)`` by the method of images.

    ``P = 4 sum_{k>=1} (-1)^{k+1} Phi_bar((2k-1) z)`` with ``z = eta/(s sqrt T)``.
    """
    z = eta / (s * math.sqrt(T))
    k = np.arange(1, terms + 1)
    terms_ = 4.0 * (-1.0) ** (k + 1) * stats.norm.sf((2 * k - 1) * z)
    return float(min(1.0, terms_.sum()))


def gaussian_tube_exit_prob_series(eta, T, s, terms=200):
    """Same probability from the eigenfunction series of the heat equation.

    Converges fast when the tube is narrow; used to cross-check the images.
    """
    z2 = (eta / s) ** 2
    n = np.arange(terms)
    stay = 4.0 / math.pi * np.sum((-1.0) ** n / (2 * n + 1)
                                  * np.exp(-((2 * n + 1) ** 2) * math.pi**2 * T / (8.0 * z2)))
    return float(1.0 - stay)


@dataclass
class ScanRow:
    epsilon: float
    kappa: float
    eta: float
    estimator: str
    n: int
    p_hat: float
    stderr: float
    neg_rate: float
    predicted_rate: float
    regime_flag: str
    usable: bool = True

    @property
    def eps2kappa(self):
        return self.epsilon ** (2 * self.kappa)

    def ci(self, level=0.99):
        zq = stats.norm.ppf(0.5 + level / 2)
        return self.p_hat - zq * self.stderr, self.p_hat + zq * self.stderr

    def diagnostic_log_p(self):
        """``log(p_hat + 1/n)``; finite even when nothing was observed."""
        return math.log(self.p_hat + 1.0 / self.n)


@dataclass
class ScanResult:
    rows: list
    predicted: float = float("nan")
    kind: str = "mdp"
    consistency: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def scaled_log_p(self):
        """``eps^{2 kappa} log p_hat`` per row (``-inf`` for empty rows)."""
        return -self.column("neg_rate")


def _neg_rate(p, eps2k):
    return -eps2k * math.log(p) if p > 0 else math.inf


def _resolve_dt(dt, eps, T):
    if dt is None:
        return 1e-4 * T
    if callable(dt):
        return dt(eps)
    return float(dt)


def _estimate(ens, event, estimator):
    n = ens.n
    if estimator == "crude":
        p = float(np.mean(event))
        se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
        return p, se
    w = ens.tilt_weights(two_sided=True) * event
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(n))


def _sorted_eps(epsilons):
    eps = sorted((float(e) for e in epsilons), reverse=True)
    if not eps or eps[-1] <= 0:
        raise InvalidQuery("epsilon values must be positive")
    return eps


def mdp_scan(env, epsilons, kappa, eta, T=1.0, x0=0.0, dt=None, estimator="crude",
             n_replicas=10_000, seed=0, tilt=None, threads=None, check_consistency=True):
    """Estimate ``p(eps) = P(sup_t |X_t - x0 - b_eff t| > eta)`` across epsilon.

    Parameters
    ----------
    env : ChainSpec, EnvironmentPath or PeriodicEnv
        A ``ChainSpec`` is sampled afresh for each replica.
    estimator : {"crude", "tilted"}
        ``tilted`` simulates with an extra drift ``+-tilt`` (sign chosen at
        random per replica) and reweights by the likelihood ratio of the
        two-component mixture.
    tilt : float, optional
        Extra drift magnitude, default ``eta / T``.
    dt : float or callable, optional
        Time step, or a function of epsilon returning one.
    """
    if estimator not in ("crude", "tilted"):
        raise InvalidQuery(f"unknown estimator {estimator!r}")
    if not eta > 0:
        raise InvalidQuery("eta must be positive")
    co = homogenize(env.spec if isinstance(env, EnvironmentPath) else env)
    predicted = tube_exit_rate(eta, T, co)
    c = eta / T if tilt is None else float(tilt)
    rows = []
    eps_list = _sorted_eps(epsilons)
    for idx, eps in enumerate(eps_list):
        p = SimulationParams(eps, kappa, x0, T, dt=_resolve_dt(dt, eps, T), seed=seed)
        ens = euler_ensemble(p, env, n_replicas, with_drift=True,
                             tilt=c if estimator == "tilted" else 0.0,
                             coeffs=co, threads=threads, key=(idx, 0))
        p_hat, se = _estimate(ens, ens.sup_dev > eta, estimator)
        rows.append(ScanRow(eps, kappa, eta, estimator, n_replicas, p_hat, se,
                            _neg_rate(p_hat, p.eps2kappa), predicted, p.regime_flag,
                            usable=p_hat > 0))
    res = ScanResult(rows, predicted, "mdp")
    if estimator == "tilted" and check_consistency:
        eps = eps_list[0]
        p = SimulationParams(eps, kappa, x0, T, dt=_resolve_dt(dt, eps, T), seed=seed)
        ens = euler_ensemble(p, env, n_replicas, with_drift=True, coeffs=co,
                             threads=threads, key=(0, 1))
        pc, sec = _estimate(ens, ens.sup_dev > eta, "crude")
        crude = ScanRow(eps, kappa, eta, "crude", n_replicas, pc, sec,
                        _neg_rate(pc, p.eps2kappa), predicted, p.regime_flag, pc > 0)
        lo1, hi1 = rows[0].ci()
        lo2, hi2 = crude.ci()
        res.consistency = {"crude": crude, "overlap": bool(lo1 <= hi2 and lo2 <= hi1)}
    return res


def negligibility_scan(env, epsilons, kappa, eta, T=1.0, x0=0.0, dt=None, which="drift",
                       n_replicas=10_000, seed=0, threads=None):
    """Estimate ``P(sup_t |int_0^t [c(X_s/eps) - c_eff] ds| > eta)``.

    ``which="drift"`` uses ``c = b``, ``c_eff = b_eff``; ``"diffusion"`` uses
    ``c = sigma^2``, ``c_eff = a_eff``. These probabilities should vanish
    faster than any ``exp(-C / eps^{2 kappa})``.
    """
    if which not in ("drift", "diffusion"):
        raise InvalidQuery(f"unknown functional {which!r}")
    if not eta > 0:
        raise InvalidQuery("eta must be positive")
    co = homogenize(env.spec if isinstance(env, EnvironmentPath) else env)
    rows = []
    for idx, eps in enumerate(_sorted_eps(epsilons)):
        p = SimulationParams(eps, kappa, x0, T, dt=_resolve_dt(dt, eps, T), seed=seed)
        ens = euler_ensemble(p, env, n_replicas, with_drift=True, coeffs=co,
                             threads=threads, key=(idx, 2))
        stat = ens.sup_int_b if which == "drift" else ens.sup_int_s2
        p_hat, se = _estimate(ens, stat > eta, "crude")
        rows.append(ScanRow(eps, kappa, eta, "crude", n_replicas, p_hat, se,
                            _neg_rate(p_hat, p.eps2kappa), math.nan, p.regime_flag,
                            usable=p_hat > 0))
    return ScanResult(rows, math.nan, f"negligibility-{which}")


def integrand_bound(env, which="drift"):
    """Pathwise bound on the integrand; beyond ``bound * T`` the event is empty."""
    co = homogenize(env.spec if isinstance(env, EnvironmentPath) else env)
    if isinstance(env, EnvironmentPath):
        env = env.spec
    if isinstance(env, ChainSpec):
        vals = env.observable if which == "drift" else env.states**2
    else:
        vals = env.b if which == "drift" else env.sigma**2
    ref = co.b_eff if which == "drift" else co.a_eff
    return float(np.max(np.abs(vals)) + abs(ref))
