"""Effective (homogenized) drift and diffusion constants."""

from dataclasses import dataclass, field

import numpy as np

from .env import ChainSpec, PeriodicEnv, stationary_dist
from .errors import InvalidEnvironment


@dataclass(frozen=True)
class HomogenizedCoefficients:
    b_eff: float
    a_eff: float
    provenance: dict = field(default_factory=dict, compare=False)
    quad_error: float = 0.0

    def __post_init__(self):
        if not self.a_eff > 0:
            raise InvalidEnvironment(f"a_eff must be positive, got {self.a_eff}")


def homogenize_chain(spec: ChainSpec, pi=None) -> HomogenizedCoefficients:
    """Harmonic-mean averages under the invariant law.

    ``a_eff = 1 / sum(pi_i / a_i^2)`` and
    ``b_eff = sum(g(a_i) pi_i / a_i^2) / sum(pi_i / a_i^2)``.
    """
    if pi is None:
        pi = stationary_dist(spec)
    w = pi / spec.states**2
    z = w.sum()
    return HomogenizedCoefficients(
        b_eff=float((spec.observable * w).sum() / z),
        a_eff=float(1.0 / z),
        provenance={"kind": "chain", "m": spec.m, "pi": pi.tolist()},
    )


def _midpoint(sig, b):
    s2 = np.asarray(sig, dtype=float) ** 2
    if np.min(s2) <= 0:
        raise InvalidEnvironment("sigma^2 must be positive on the grid")
    inv = np.mean(1.0 / s2)
    return float(np.mean(b / s2) / inv), float(1.0 / inv)


def homogenize_periodic(env: PeriodicEnv) -> HomogenizedCoefficients:
    """Midpoint-rule quadrature of the periodic averages.

    The reported ``quad_error`` is the larger of the changes in ``b_eff`` and
    ``a_eff`` when the resolution is halved.
    """
    b_eff, a_eff = _midpoint(env.sigma, env.b)
    quad_error = 0.0
    if env.resolution >= 2:
        sig2, b2 = env.tables_at(env.resolution // 2)
        b_half, a_half = _midpoint(sig2, b2)
        quad_error = max(abs(b_eff - b_half), abs(a_eff - a_half))
    return HomogenizedCoefficients(
        b_eff=b_eff, a_eff=a_eff, quad_error=quad_error,
        provenance={"kind": "periodic", "resolution": env.resolution},
    )


def homogenize(env):
    """Dispatch on the environment kind."""
    if isinstance(env, ChainSpec):
        return homogenize_chain(env)
    return homogenize_periodic(env)
