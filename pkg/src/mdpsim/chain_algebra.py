"""Poisson equation and martingale-decomposition ingredients for the chain.

For a centered observable ``f`` (``f . pi = 0``) the Poisson equation
``Lambda h = f`` has a unique solution with ``h . pi = 0``. Then

    int_0^t f(sigma(s)) ds = V_t - V_0 - M_t,   V_t = h(sigma(t)),

with ``M`` a purely discontinuous martingale whose jumps are bounded by
``K = max_ij |h_j - h_i|`` and whose predictable quadratic variation has
density ``m(sigma(t))``.
"""

from dataclasses import dataclass

import numpy as np

from .env import stationary_dist
from .errors import SolveFailed

CENTER_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class CenteredObservable:
    values: np.ndarray
    shift: float
    """Constant subtracted (after weighting) to center the raw values."""


@dataclass(frozen=True)
class PoissonDecomposition:
    """Solution ``h`` of ``Lambda h = f`` with its derived bounds.

    Attributes
    ----------
    h : (m,) ndarray
        Poisson solution, normalized by ``h . pi = 0``.
    K : float
        Bound on the jumps of ``M``.
    m : (m,) ndarray
        Quadratic-variation density per state.
    v_bound : float
        Bound on ``|V_t|``, i.e. ``max |h_i|``.
    residual : float
        ``||Lambda h - f||_inf`` of the computed solution.
    """

    h: np.ndarray
    K: float
    m: np.ndarray
    v_bound: float
    residual: float
    f: np.ndarray
    pi: np.ndarray

    @property
    def m_max(self):
        return float(self.m.max())

    @property
    def mean_qv_rate(self):
        """Long-run growth rate of ``<M>``: ``sum pi_i m_i``."""
        return float(self.pi @ self.m)


def center(spec, raw, weights, pi=None):
    """Center ``raw * weights`` under the invariant law.

    Returns ``f_i = (raw_i - c) * weights_i`` with ``c`` chosen so that
    ``f . pi = 0``; ``c = sum(pi raw w) / sum(pi w)``. With
    ``raw = g(a_i)`` and ``w = 1/a_i^2`` this is the drift process
    ``(b - b_eff)/sigma^2``; with ``raw = a_i^2`` it is ``1 - a_eff/sigma^2``.
    """
    if pi is None:
        pi = stationary_dist(spec)
    raw = np.asarray(raw, dtype=float)
    w = np.asarray(weights, dtype=float)
    c = float(np.sum(pi * raw * w) / np.sum(pi * w))
    f = (raw - c) * w
    # remove the O(eps) leftover so f . pi vanishes to roundoff
    f = f - (pi @ f) * w / (pi @ w)
    return CenteredObservable(f, c)


def drift_theta(spec, pi=None):
    """Centered drift observable ``(g(a_i) - b_eff) / a_i^2``."""
    return center(spec, spec.observable, 1.0 / spec.states**2, pi)


def diffusion_theta(spec, pi=None):
    """Centered diffusion observable ``1 - a_eff / a_i^2``."""
    return center(spec, spec.states**2, 1.0 / spec.states**2, pi)


def solve_poisson(spec, f, pi=None):
    """Solve ``Lambda h = f`` in the class ``h . pi = 0``.

    Uses least squares on the augmented system ``[Lambda; pi^T] h = [f; 0]``
    followed by one refinement step.
    """
    if pi is None:
        pi = stationary_dist(spec)
    fv = np.asarray(getattr(f, "values", f), dtype=float)
    lam = spec.generator
    aug = np.vstack([lam, pi[None, :]])
    rhs = np.concatenate([fv, [0.0]])
    h, _, rank, _ = np.linalg.lstsq(aug, rhs, rcond=None)
    if rank < spec.m:
        raise SolveFailed(f"augmented Poisson system has rank {rank} < {spec.m}")
    corr, *_ = np.linalg.lstsq(aug, rhs - aug @ h, rcond=None)
    h = h + corr
    residual = float(np.max(np.abs(lam @ h - fv)))
    scale = max(1.0, float(np.max(np.abs(fv))))
    if not np.isfinite(residual) or residual > 1e-8 * scale:
        raise SolveFailed(f"Poisson residual {residual:.3g} too large")
    m = qv_density(spec, h)
    K = float(h.max() - h.min())
    return PoissonDecomposition(h=h, K=K, m=m, v_bound=float(np.abs(h).max()),
                                residual=residual, f=fv, pi=pi)


def qv_density(spec, h):
    """Per-state density of ``<M>``.

    ``m_i = h^T (diag(Lambda^T e_i) - [e_i e_i^T Lambda + Lambda^T e_i e_i^T]) h``.
    """
    lam = spec.generator
    h = np.asarray(h, dtype=float)
    m = np.empty(spec.m)
    for i in range(spec.m):
        e = np.zeros(spec.m)
        e[i] = 1.0
        col = lam.T @ e
        ee = np.outer(e, e)
        A = np.diag(col) - (ee @ lam + lam.T @ ee)
        m[i] = h @ A @ h
    return m
