# %% [markdown]
# # Jump-robust pre-averaging realized volatility
#
# Raw squared returns of noisy high-frequency prices over-estimate daily
# integrated variance badly: microstructure noise dominates at high
# sampling frequencies. The estimator here pre-averages returns in
# overlapping windows of length K = floor(sqrt(m)) with the triangular
# weight g(x) = min(x, 1-x), subtracts the residual noise bias, and
# truncates windows whose pre-averaged increment exceeds a data-driven
# level (removing price jumps).

# %%
import numpy as np

from ergi import (SimConfig, StructuralParams, TickDay, jump_robust_prv,
                  psi_constant, relative_error)
from ergi.simulate import noisy_obs_batch, simulate_batch

print("weight-function constant psi =", psi_constant())

theta = StructuralParams(omega=-0.1, gamma=0.3, beta=0.5, nu=2.0)

# %% [markdown]
# The estimator's accuracy improves with the intra-day observation count m.
# The published study reports mean squared relative errors of roughly
# 0.012 / 0.046 / 0.108 at m = 11700 / 1170 / 390; reproducing that ordering
# takes a few seconds here.

# %%
for m in (11700, 1170, 390):
    cfg = SimConfig(n_days=100, grid_steps_per_day=11700, obs_per_day=m, seed=11)
    batch = simulate_batch(theta, cfg, n_reps=1)
    y = noisy_obs_batch(batch)[0]
    ts = np.arange(m) / m
    rv = [jump_robust_prv(TickDay(d, ts, y[d]), c_tau_multiplier=4.0)
          for d in range(100)]
    err = relative_error(rv, batch.true_iv[0])
    trunc = np.mean([r.truncated_count for r in rv])
    print(f"m={m:>6}: avg squared relative error {err:.4f}, "
          f"truncated windows/day {trunc:.1f}")

# %% [markdown]
# At a realistic equity scale (daily variance ~1e-4) the truncation makes
# the estimator essentially immune to a 5%-sized price jump, while the
# untruncated sum absorbs the full squared jump.

# %%
m = 1170
rng = np.random.default_rng(1)
x = np.cumsum(rng.normal(0.0, np.sqrt(1e-4 / m), m))
y = x + rng.normal(0.0, 1e-4, m)
day = TickDay(0, np.arange(m) / m, y)
day_jumped = TickDay(0, day.timestamps, np.where(np.arange(m) >= m // 2, y + 0.05, y))

clean = jump_robust_prv(day, 4.0)
jumped = jump_robust_prv(day_jumped, 4.0)
naive = jump_robust_prv(day_jumped, 1e9)          # truncation disabled
print(f"clean day estimate    : {clean.value:.6e}")
print(f"with jump, truncated  : {jumped.value:.6e} "
      f"({jumped.truncated_count} windows removed)")
print(f"with jump, untruncated: {naive.value:.6e} "
      f"(jump^2 = {0.05**2:.1e} leaks in)")
