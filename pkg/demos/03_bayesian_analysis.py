"""
Comparing two algorithms with a Bayesian model
==============================================

Synthetic running times stand in for measurements: log T_A depends linearly on log T_B.
"""

import numpy as np

from netbench import stats

rng = np.random.default_rng(1)
log_tb = rng.uniform(0, 10, 30)
log_ta = -5.2 + 1.0 * log_tb + rng.normal(0, 1.1, 30)

trace = stats.mcmc_sample(stats.ModelSpec("relative_time"), log_ta, log_tb, draws=4000)
for name, row in trace.summary().items():
    print(f"{name:6s} HPD [{row.hpd_low:.2f}, {row.hpd_high:.2f}]  mean {row.mean:.2f}  "
          f"rhat {row.rhat:.3f}")

# is the slope practically one? compare its HPD with a region of practical equivalence
low, high = stats.hpd_interval(trace["beta"])
print("beta vs ROPE [0.95, 1.05]:", stats.rope_verdict(low, high, 0.95, 1.05))

# a second covariate that the data do depend on; diameters spread over orders of
# magnitude, as in real instance sets, make the effect identifiable
log_diam = rng.uniform(np.log(5), np.log(1000), 30)
log_ta2 = log_ta + 0.8 * log_diam
trace = stats.mcmc_sample(stats.ModelSpec("relative_time_with_diameter"), log_ta2, log_tb,
                          log_diam, draws=4000)
bf = stats.bayes_factor_indicator(trace["selected_model"])
print("inclusion probability:", round(bf.inclusion_probability, 3),
      "Bayes factor:", bf.bayes_factor, bf.bound or "")

# classic paired test on the raw times for comparison
print(stats.wilcoxon_signed_rank(np.exp(log_ta), np.exp(log_tb)))
