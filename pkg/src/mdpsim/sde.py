"""Path simulation of ``dX = b(X/eps) dt + eps^kappa sigma(X/eps) dB``.

Two independent constructions are provided:

* Euler-Maruyama on the equation itself, coefficients frozen at the left
  endpoint of each step;
* the time-change construction of the driftless equation: a Brownian motion
  ``beta`` run against the additive clock
  ``C(r) = int_0^r ds / (eps^{2 kappa} sigma^2((beta_s + x0)/eps))``, so that
  ``Y_t = x0 + beta(C^{-1}(t))``. The drift is then introduced by Girsanov
  reweighting.

Ensemble helpers run many replicas and keep only path summaries, which is
what the Monte Carlo checks consume.
"""

import logging
import threading
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import rng as _rng
from .env import ChainSpec, EnvironmentPath, PeriodicEnv, realize
from .errors import InvalidQuery, InvalidWeightRequest
from .homogenize import homogenize
from .parallel import run_replicas

log = logging.getLogger(__name__)

NOISE_BLOCK = 1 << 15
CELL_BUDGET = 10**7


@dataclass(frozen=True)
class SimulationParams:
    """Scales, horizon and discretization of one simulation.

    ``dt`` defaults to ``1e-4 * T``. ``h_beta`` (time-change scheme only)
    defaults to the largest step whose clock increment never exceeds
    ``dt / 10``.
    """

    epsilon: float
    kappa: float
    x0: float = 0.0
    T: float = 1.0
    dt: float = None
    h_beta: float = None
    seed: int = 0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.kappa > 0 and self.T > 0):
            raise InvalidQuery("epsilon, kappa and T must be positive")
        if self.dt is None:
            object.__setattr__(self, "dt", 1e-4 * self.T)
        if not self.dt > 0 or self.dt > self.T:
            raise InvalidQuery(f"dt must lie in (0, T], got {self.dt}")
        if self.h_beta is not None and not self.h_beta > 0:
            raise InvalidQuery("h_beta must be positive")

    @property
    def n_steps(self):
        return max(1, int(round(self.T / self.dt)))

    @property
    def step(self):
        """Grid spacing actually used: ``T / n_steps``."""
        return self.T / self.n_steps

    @property
    def eps_kappa(self):
        return self.epsilon**self.kappa

    @property
    def eps2kappa(self):
        return self.epsilon ** (2 * self.kappa)

    @property
    def random_regime(self):
        """Whether kappa lies in the range covered for random environments."""
        return self.kappa < 1.0 / 6.0

    @property
    def periodic_regime(self):
        return self.kappa < 0.5

    @property
    def regime_flag(self):
        if self.random_regime:
            return "kappa<1/6"
        if self.periodic_regime:
            return "kappa<1/2"
        return "kappa>=1/2"

    def replace(self, **kw):
        d = dict(epsilon=self.epsilon, kappa=self.kappa, x0=self.x0, T=self.T,
                 dt=self.dt, h_beta=self.h_beta, seed=self.seed)
        d.update(kw)
        return SimulationParams(**d)


def cell_resolving_dt(epsilon, kappa, sigma_max, T=1.0, cells=10.0, cap=None):
    """Time step whose typical spatial increment is ``epsilon / cells``.

    Euler steps that are not small against the cell size sample the
    environment at scattered points and drift toward the arithmetic rather
    than the harmonic mean of ``sigma^2``.
    """
    dt = (epsilon / (cells * epsilon**kappa * abs(sigma_max))) ** 2
    n = int(np.ceil(T / dt))
    dt = T / n
    if cap is not None:
        dt = min(dt, cap)
    return dt


def cell_resolving_h_beta(epsilon, cells=10.0):
    """Auxiliary Brownian step whose spatial increment is ``epsilon / cells``.

    The auxiliary motion of the time-change scheme lives in space units, so
    unlike the Euler step this does not depend on ``kappa`` or ``sigma``.
    """
    return (epsilon / cells) ** 2


@dataclass
class DiffusionPath:
    times: np.ndarray
    values: np.ndarray
    scheme: str
    params: SimulationParams
    with_drift: bool = False
    girsanov_log_weight: float = None
    env: object = field(default=None, repr=False)


class _EnvView:
    """Kernel-facing arrays for one environment, extended on demand."""

    def __init__(self, env, params, lock=None):
        self.env = env
        self.params = params
        self.periodic = isinstance(env, PeriodicEnv)
        self._lock = lock
        if self.periodic:
            self.sig_tab = env.sigma
            self.b_tab = env.b
            self.edges = np.array([0.0, 1.0])
            self.sig_seg = np.ones(1)
            self.b_seg = np.zeros(1)
        else:
            self.sig_tab = np.ones(1)
            self.b_tab = np.zeros(1)
            self.refresh()

    @property
    def sigma_bounds(self):
        s = np.abs(self.env.sigma if self.periodic else self.env.spec.states)
        return float(s.min()), float(s.max())

    @property
    def b_max(self):
        b = self.env.b if self.periodic else self.env.spec.observable
        return float(np.abs(b).max())

    def refresh(self):
        self.edges, self.sig_seg, self.b_seg = self.env.segment_arrays()

    def cover(self, x_lo, x_hi):
        if self.periodic:
            return
        inv = 1.0 / self.params.epsilon
        lo, hi = x_lo * inv, x_hi * inv
        cells = (hi - lo) * float(np.max(self.env.spec.jump_rates))
        if cells > CELL_BUDGET:
            log.warning("environment window spans ~%.3g cells (budget %.3g)", cells, CELL_BUDGET)
        if self._lock is None:
            self.env.extend_to(lo, hi)
        else:
            with self._lock:
                self.env.extend_to(lo, hi)
        self.refresh()

    def cover_point(self, x):
        """Extend around ``x`` after a kernel ran off the realized range."""
        width = max(abs(x - self.params.x0), self.params.eps_kappa, 100 * self.params.epsilon)
        self.cover(x - width, x + width)


def _as_view(env, params, seed_key, lock=None):
    if isinstance(env, ChainSpec):
        env = realize(env, seed_key)
    if not isinstance(env, (EnvironmentPath, PeriodicEnv)):
        raise TypeError(f"unsupported environment {type(env).__name__}")
    return _EnvView(env, params, lock)


def _initial_window(view, params, extra_drift=0.0):
    _, smax = view.sigma_bounds
    half = (view.b_max + abs(extra_drift)) * params.T + 6.0 * params.eps_kappa * smax * np.sqrt(params.T)
    view.cover(params.x0 - half, params.x0 + half)


def _euler(view, params, noise, with_drift, c_sim, c_abs, b_eff, a_eff, store):
    acc = np.zeros(K.N_ACC)
    state = np.array([params.x0, 0.0, -1.0])
    n = params.n_steps
    done = 0
    inv_eps = 1.0 / params.epsilon
    while done < n:
        xi = noise.standard_normal(min(NOISE_BLOCK, n - done))
        pos = 0
        while pos < xi.size:
            used = K.euler_block(state, xi[pos:], view.edges, view.sig_seg, view.b_seg,
                                 view.periodic, view.sig_tab, view.b_tab, inv_eps,
                                 params.eps_kappa, params.step, bool(with_drift), c_sim, c_abs,
                                 params.x0, b_eff, a_eff, acc, store)
            pos += used
            if pos < xi.size:
                view.cover_point(state[0])
                state[2] = -1.0
        done += xi.size
    return state[0], acc


def _default_h_beta(view, params):
    smin, _ = view.sigma_bounds
    return params.step / 10.0 * params.eps2kappa * smin**2


def _timechange(view, params, noise, out, with_drift=False):
    n = params.n_steps
    h_beta = params.h_beta or _default_h_beta(view, params)
    state = np.array([0.0, 0.0, 1.0, -1.0])
    out[0] = params.x0
    inv_eps = 1.0 / params.epsilon
    while state[2] <= n:
        xi = noise.standard_normal(NOISE_BLOCK)
        pos = 0
        while pos < xi.size and state[2] <= n:
            used = K.timechange_block(state, xi[pos:], view.edges, view.sig_seg, view.b_seg,
                                      view.periodic, view.sig_tab, view.b_tab, inv_eps,
                                      params.eps2kappa, h_beta, params.step, n, params.x0,
                                      bool(with_drift), out)
            pos += used
            if pos < xi.size and state[2] <= n:
                view.cover_point(params.x0 + state[0])
                state[3] = -1.0
    return out


def _coeffs(env):
    if isinstance(env, EnvironmentPath):
        return homogenize(env.spec)
    return homogenize(env)


def simulate_euler(params, env, with_drift=True):
    """One Euler-Maruyama path on the grid ``t_i = i T / n``.

    ``env`` may be a realized :class:`EnvironmentPath`, a
    :class:`PeriodicEnv`, or a :class:`ChainSpec` (a fresh environment is
    then drawn from ``params.seed``).
    """
    view = _as_view(env, params, _rng.subkey(params.seed, _rng.ENV))
    _initial_window(view, params)
    co = _coeffs(view.env)
    store = np.empty(params.n_steps + 1)
    store[0] = params.x0
    _euler(view, params, _rng.stream(params.seed, _rng.NOISE), with_drift, 0.0, 0.0,
           co.b_eff, co.a_eff, store)
    times = np.linspace(0.0, params.T, params.n_steps + 1)
    return DiffusionPath(times, store, "euler", params, bool(with_drift), env=view.env)


def simulate_timechange(params, env, with_drift=False):
    """Path built by time-changing a Brownian motion.

    By default the driftless ``Y``. With ``with_drift`` the auxiliary motion
    carries the drift ``b / (eps^{2 kappa} sigma^2)`` on its own clock, which
    gives the drifted equation without a likelihood ratio.
    """
    view = _as_view(env, params, _rng.subkey(params.seed, _rng.ENV))
    _initial_window(view, params)
    out = np.empty(params.n_steps + 1)
    _timechange(view, params, _rng.stream(params.seed, _rng.NOISE), out, with_drift)
    times = np.linspace(0.0, params.T, params.n_steps + 1)
    return DiffusionPath(times, out, "timechange", params, bool(with_drift), env=view.env)


def _env_values(env, x, epsilon):
    u = np.asarray(x) / epsilon
    if isinstance(env, PeriodicEnv):
        return env.lookup(u)
    idx = env.state_index(u)
    return env.spec.states[idx], env.spec.observable[idx]


def girsanov_log_weight(path, params, env=None):
    """Log likelihood ratio turning the driftless law into the drifted one.

    ``log U_T = sum (b/s) dB - 1/2 sum (b/s)^2 dt`` with ``s = eps^kappa sigma``
    frozen at left endpoints and ``dB = dY / s`` recovered from the path.
    """
    if path.with_drift:
        raise InvalidWeightRequest("path was simulated with drift")
    p = path.params
    for name in ("epsilon", "kappa", "x0", "T"):
        if not np.isclose(getattr(p, name), getattr(params, name)):
            raise InvalidWeightRequest(f"parameter {name} does not match the path")
    if path.values.shape != path.times.shape or path.values[0] != params.x0:
        raise InvalidWeightRequest("path grid is inconsistent with params")
    env = path.env if env is None else env
    if env is None or isinstance(env, ChainSpec):
        raise InvalidWeightRequest("the realized environment of the path is required")
    y = path.values
    sig, b = _env_values(env, y[:-1], params.epsilon)
    s = params.eps_kappa * sig
    dt = np.diff(path.times)
    dB = np.diff(y) / s
    r = b / s
    return float(np.sum(r * dB) - 0.5 * np.sum(r * r * dt))


def quadratic_variation(path):
    """``(realized sum (dX)^2, predicted sum s^2 dt)`` along a stored path."""
    p = path.params
    sig, _ = _env_values(path.env, path.values[:-1], p.epsilon)
    return (float(np.sum(np.diff(path.values) ** 2)),
            float(np.sum((p.eps_kappa * sig) ** 2 * np.diff(path.times))))


@dataclass
class Ensemble:
    """Per-replica summaries of an ensemble run.

    Attributes
    ----------
    terminal : (n,) ndarray
        ``X_T``.
    sup_dev : (n,) ndarray
        ``max_i |X_{t_i} - x0 - b_eff t_i|`` on the grid.
    log_weight : (n,) ndarray
        Girsanov log-weight (meaningful for driftless runs).
    tilt_A, tilt_Q : (n,) ndarray
        Sufficient statistics of the tilted likelihood ratio.
    sup_int_b, sup_int_s2 : (n,) ndarray
        ``sup_t |int_0^t (b - b_eff) ds|`` and the same for ``sigma^2 - a_eff``.
    """

    terminal: np.ndarray
    sup_dev: np.ndarray
    log_weight: np.ndarray
    tilt_A: np.ndarray
    tilt_Q: np.ndarray
    sup_int_b: np.ndarray
    sup_int_s2: np.ndarray
    qv: np.ndarray
    qv_pred: np.ndarray
    tilt_sign: np.ndarray
    params: SimulationParams = None
    b_eff: float = 0.0
    a_eff: float = 1.0

    @property
    def n(self):
        return self.terminal.size

    def tilt_weights(self, two_sided=True):
        """Likelihood ratios ``dP/dQ`` of the tilted samples.

        For the two-sided (symmetric mixture) proposal the ratio is
        ``exp(Q/2) / cosh(A)``; for the one-sided proposal it is
        ``exp(-A + Q/2)``.
        """
        if two_sided:
            # exp(Q/2)/cosh(A) computed in log space
            a = np.abs(self.tilt_A)
            return np.exp(0.5 * self.tilt_Q - a - np.log1p(np.exp(-2 * a)) + np.log(2.0))
        return np.exp(-self.tilt_A + 0.5 * self.tilt_Q)


def _replica_env(env, params, key, i, shared):
    if shared is not None:
        return shared
    if isinstance(env, ChainSpec):
        return realize(env, _rng.subkey(params.seed, *key, i, _rng.ENV))
    return env


def euler_ensemble(params, env, n_paths, with_drift=True, tilt=0.0, two_sided=True,
                   coeffs=None, quenched=False, threads=None, key=()):
    """Run ``n_paths`` Euler replicas and collect their summaries.

    Parameters
    ----------
    env : ChainSpec, EnvironmentPath or PeriodicEnv
        A ``ChainSpec`` gives a fresh environment per replica (annealed)
        unless ``quenched``; a realized path is shared by all replicas.
    tilt : float
        Magnitude ``c`` of an extra constant drift. With ``two_sided`` each
        replica picks the sign of the extra drift with probability 1/2.
    key : tuple of int
        Extra stream key, e.g. the index of an epsilon in a scan.
    """
    spec_like = env.spec if isinstance(env, EnvironmentPath) else env
    co = coeffs or homogenize(spec_like)
    lock = threading.Lock()
    shared = None
    if isinstance(env, EnvironmentPath):
        shared = env
    elif isinstance(env, ChainSpec) and quenched:
        shared = realize(env, _rng.subkey(params.seed, *key, _rng.ENV))
    elif isinstance(env, PeriodicEnv):
        shared = env
    shared_view = None
    if shared is not None:
        shared_view = _EnvView(shared, params, lock)
        _initial_window(shared_view, params, tilt)
    c_abs = abs(float(tilt))

    def one(i):
        noise = _rng.stream(params.seed, *key, i, _rng.NOISE)
        if shared_view is not None:
            view = _EnvView(shared, params, lock)
        else:
            view = _EnvView(_replica_env(env, params, key, i, None), params)
            _initial_window(view, params, tilt)
        sign = 1.0
        if c_abs and two_sided and noise.random() < 0.5:
            sign = -1.0
        x, acc = _euler(view, params, noise, with_drift, sign * c_abs, c_abs,
                        co.b_eff, co.a_eff, np.empty(0))
        return x, acc, sign

    res = run_replicas(one, n_paths, threads)
    acc = np.array([r[1] for r in res]).reshape(n_paths, K.N_ACC)
    return Ensemble(
        terminal=np.array([r[0] for r in res]),
        sup_dev=acc[:, K.SUP_DEV], log_weight=acc[:, K.LOGW],
        tilt_A=acc[:, K.TILT_A], tilt_Q=acc[:, K.TILT_Q],
        sup_int_b=acc[:, K.SUP_INT_B], sup_int_s2=acc[:, K.SUP_INT_S2],
        qv=acc[:, K.QV], qv_pred=acc[:, K.QV_PRED],
        tilt_sign=np.array([r[2] for r in res]),
        params=params, b_eff=co.b_eff, a_eff=co.a_eff,
    )


def timechange_ensemble(params, env, n_paths, with_drift=False, quenched=False, threads=None,
                        key=()):
    """Time-change replicas; returns ``(terminal, sup_dev)`` arrays.

    ``sup_dev`` is ``max_i |Y_{t_i} - x0 - b_eff t_i|`` on the output grid
    for drifted runs and ``max_i |Y_{t_i} - x0|`` for driftless ones.
    """
    line = 0.0
    if with_drift:
        line = _coeffs(env).b_eff * np.linspace(0.0, params.T, params.n_steps + 1)
    lock = threading.Lock()
    shared = None
    if isinstance(env, (EnvironmentPath, PeriodicEnv)):
        shared = env
    elif quenched:
        shared = realize(env, _rng.subkey(params.seed, *key, _rng.ENV))
    if shared is not None:
        _initial_window(_EnvView(shared, params, lock), params)

    def one(i):
        noise = _rng.stream(params.seed, *key, i, _rng.NOISE)
        if shared is not None:
            view = _EnvView(shared, params, lock)
        else:
            view = _EnvView(_replica_env(env, params, key, i, None), params)
            _initial_window(view, params)
        out = np.empty(params.n_steps + 1)
        _timechange(view, params, noise, out, with_drift)
        return out[-1], float(np.max(np.abs(out - params.x0 - line)))

    res = run_replicas(one, n_paths, threads)
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])
