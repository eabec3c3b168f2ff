"""
Adding the drift back by reweighting
====================================

Driftless paths weighted by the Girsanov likelihood ratio reproduce
expectations under the drifted law.
"""

import numpy as np

from mdpsim import ChainSpec, SimulationParams, euler_ensemble

spec = ChainSpec([1.0, 2.0], [[-1.0, 1.0], [1.0, -1.0]], [1.0, 0.0])
p = SimulationParams(0.1, 0.1, T=1.0, dt=1e-4, seed=3)

free = euler_ensemble(p, spec, 3000, with_drift=False, key=(0,))
drift = euler_ensemble(p, spec, 3000, with_drift=True, key=(1,))
w = np.exp(free.log_weight)

print(f"mean weight     {w.mean():.4f} +- {w.std() / np.sqrt(w.size):.4f}")
print(f"reweighted E[X] {np.mean(w * free.terminal):.4f}")
print(f"drifted E[X]    {drift.terminal.mean():.4f}")
