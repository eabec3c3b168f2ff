"""
The jump martingale behind the averaging
========================================

Integrals of a centered observable along the environment split into a
bounded term and a martingale with bounded jumps. The tail of that
martingale obeys an exponential bound; here we count how much room is left.
"""

from mdpsim import ChainSpec, drift_theta, sample_decomposition, solve_poisson, tail_table

spec = ChainSpec([1.0, 2.0, 3.0], [[-1.0, 0.6, 0.4], [0.5, -1.5, 1.0], [2.0, 1.0, -3.0]],
                 [3.0, 0.0, -3.0])
f = drift_theta(spec)
dec = solve_poisson(spec, f)
print("jump bound K =", dec.K, " mean QV rate =", dec.mean_qv_rate)

s = sample_decomposition(spec, f, 100.0, seed=4, decomposition=dec)
print(f"{s.times.size} events, identity residual {s.identity_residual():.1e}, "
      f"sup|M| = {s.sup_abs_M:.3f}, <M>_U = {s.qv[-1]:.3f}, [M]_U = {s.bracket:.3f}")

print("  r     q   freq     ucl99    bound")
for row in tail_table(spec, f, 10.0, [2.0, 4.0, 6.0], [5.0, 10.0], 4000, seed=5):
    print(f"{row.r:4.1f} {row.q:5.1f}  {row.freq:.4f}  {row.ucl99:.4f}  {row.bound:.4f}")
