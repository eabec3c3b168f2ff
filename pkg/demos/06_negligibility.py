"""
Fluctuating coefficients average out quickly
============================================

Along the path, the running integrals of ``b - b_eff`` and
``sigma^2 - a_eff`` are small. On the ``eps^{2 kappa}`` log scale their
excursion probabilities keep falling as the environment gets finer.
"""

from mdpsim import ChainSpec, cell_resolving_dt, negligibility_scan

spec = ChainSpec([1.0, 2.0], [[-1.0, 1.0], [1.0, -1.0]], [1.0, 0.0])
dt = lambda eps: cell_resolving_dt(eps, 0.1, 2.0, 1.0, cells=10)
for which, eta in (("drift", 0.15), ("diffusion", 0.5)):
    res = negligibility_scan(spec, [0.2, 0.1, 0.05], 0.1, eta, dt=dt, which=which,
                             n_replicas=1000, seed=7)
    print(which, [f"{r.p_hat:.3f}" for r in res.rows],
          [f"{v:.3f}" for v in res.scaled_log_p])
