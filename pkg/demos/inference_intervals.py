"""
Wald intervals from the sandwich covariance
===========================================

The plug-in covariance S^-1 O S^-1 / N gives standard errors for an
expectile fit. Over repeated samples the 95% intervals should cover the
true coefficients about 95% of the time.
"""

import numpy as np
from scipy import stats

from reer import irls_fit, sandwich_covariance
from reer.simulation import SimConfig, generate_batch, true_coefficients

cfg = SimConfig(case=3, tau=0.25, n_k=2000, num_batches=1, seed=7)
truth = true_coefficients(cfg)
z = stats.norm.ppf(0.975)

batch = generate_batch(cfg, 0, 0)
beta = irls_fit(batch, cfg.tau).beta
se = np.sqrt(np.diag(sandwich_covariance(batch, beta, cfg.tau)))
for j in range(3):
    print(f"beta_{j}: {beta[j]:.4f} +/- {z * se[j]:.4f}   (truth {truth[j]:.4f})")

hits = np.zeros(3)
reps = 200
for rep in range(reps):
    b = generate_batch(cfg, 0, rep)
    est = irls_fit(b, cfg.tau).beta
    hits += np.abs(est - truth) <= z * np.sqrt(np.diag(sandwich_covariance(b, est, cfg.tau)))
print("empirical coverage:", hits / reps)
