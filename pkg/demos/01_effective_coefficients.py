"""
Effective coefficients of a two-state environment
=================================================

A diffusion whose volatility flips between 1 and 2 along space behaves,
on large scales, like a Brownian motion with constant drift and variance.
Both constants are harmonic means under the invariant law of the flipping.
"""

import numpy as np

from mdpsim import (ChainSpec, PeriodicEnv, drift_theta, homogenize, solve_poisson,
                    stationary_dist)

# volatility values, switching intensities and the drift attached to each value
spec = ChainSpec(states=[1.0, 2.0], generator=[[-1.0, 1.0], [1.0, -1.0]], observable=[1.0, 0.0])
print("invariant law:", stationary_dist(spec))

co = homogenize(spec)
print(f"b_eff = {co.b_eff:.6f}, a_eff = {co.a_eff:.6f}")

###############################################################################
# The arithmetic mean of sigma^2 would be 2.5; the harmonic mean is much
# smaller because the process lingers where sigma is small.

print("arithmetic mean of sigma^2:", np.mean(spec.states**2))

###############################################################################
# A periodic environment with the same proportions gives the same constants.

env = PeriodicEnv.piecewise([0.5], spec.states, spec.observable)
print("periodic a_eff:", homogenize(env).a_eff)

smooth = PeriodicEnv.from_functions(lambda s: np.sqrt(2 + np.sin(2 * np.pi * s)),
                                    lambda s: np.zeros_like(s))
co_s = homogenize(smooth)
print(f"smooth a_eff = {co_s.a_eff:.10f} (sqrt 3 = {np.sqrt(3):.10f}), "
      f"quadrature error estimate {co_s.quad_error:.1e}")

###############################################################################
# The centered drift observable and its Poisson solution control how fast
# the averaging happens.

f = drift_theta(spec)
dec = solve_poisson(spec, f)
print("centered drift:", f.values, " h:", dec.h, " K:", dec.K, " m:", dec.m)
