"""
Fitting an expectile regression one batch at a time
===================================================

A stream of batches is folded into a small summary state (a p x p matrix
and the current estimate). The result tracks the full-data fit closely,
and at tau = 0.5 it reproduces least squares exactly.
"""

import numpy as np

from reer import fit_stream, irls_fit
from reer.simulation import SimConfig, generate_stream, true_coefficients

# Case 3: heteroscedastic normal errors, 100 batches of 300 rows
cfg = SimConfig(case=3, tau=0.8, n_k=300, num_batches=100, seed=1)
batches = generate_stream(cfg, rep_index=0)

trajectory = []
state = fit_stream(batches, cfg.tau, callback=lambda s: trajectory.append(s.beta))
oracle = irls_fit(batches, cfg.tau).beta

print("truth   ", np.round(true_coefficients(cfg), 4))
print("oracle  ", np.round(oracle, 4))
print("renewed ", np.round(state.beta, 4))
print("gap     ", np.linalg.norm(state.beta - oracle))

# the estimate settles as batches arrive
for b in (1, 10, 50, 100):
    print(f"after {b:3d} batches: {np.round(trajectory[b - 1], 4)}")

###############################################################################
# At tau = 0.5 every weight is 1/2 and the update is recursive least squares.

half = fit_stream(batches, 0.5).beta
x = np.vstack([b.x for b in batches])
y = np.concatenate([b.y for b in batches])
ols = np.linalg.lstsq(x, y, rcond=None)[0]
print("tau=0.5 max |renewed - OLS| =", np.max(np.abs(half - ols)))
