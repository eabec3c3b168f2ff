"""Diffusions in random and periodic environments: homogenization, Poisson
decomposition, time-change simulation and moderate-deviation checks."""

__version__ = "0.1.0"

from .chain_algebra import (CenteredObservable, PoissonDecomposition, center,
                            diffusion_theta, drift_theta, qv_density, solve_poisson)
from .env import (ChainSpec, EnvironmentPath, PeriodicEnv, eval_env, realize,
                  reversed_generator, stationary_dist)
from .errors import (ConfigError, InvalidEnvironment, InvalidGenerator, InvalidPath,
                     InvalidQuery, InvalidWeightRequest, MdpsimError, NotErgodic,
                     SolveFailed)
from .homogenize import (HomogenizedCoefficients, homogenize, homogenize_chain,
                         homogenize_periodic)
from .martingale import (DecompositionSample, bound_continuous, bound_jump,
                         empirical_tail, sample_decomposition, tail_table,
                         verify_decomposition)
from .mdp import (RatePath, ScanResult, gaussian_tube_exit_prob, mdp_scan,
                  negligibility_scan, rate_J, tube_exit_oracle, tube_exit_rate)
from .sde import (DiffusionPath, SimulationParams, cell_resolving_dt, cell_resolving_h_beta,
                  euler_ensemble, girsanov_log_weight, simulate_euler, simulate_timechange,
                  timechange_ensemble)
