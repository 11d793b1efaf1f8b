"""
Expectiles of the simulation error laws
=======================================

The true coefficients in the synthetic designs are shifted by the
tau-expectile of the error law. Heavier tails push expectiles further
from zero.
"""

import numpy as np

from reer.simulation import ErrorDist, distribution_expectile, partial_moment

print(f"{'tau':>5s} {'N(0,1)':>10s} {'t(3)':>10s}")
for tau in np.round(np.arange(0.05, 1.0, 0.1), 2):
    e_n = distribution_expectile(ErrorDist.STD_NORMAL, tau)
    e_t = distribution_expectile(ErrorDist.STUDENT_T3, tau)
    print(f"{tau:5.2f} {e_n:10.6f} {e_t:10.6f}")

###############################################################################
# The defining balance: tau * E[(X - e)+] == (1 - tau) * E[(e - X)+]. For a
# mean-zero law E[(e - X)+] = E[(X - e)+] + e.

e = distribution_expectile(ErrorDist.STUDENT_T3, 0.1)
upper = partial_moment(ErrorDist.STUDENT_T3, e)
print("balance residual:", 0.1 * upper - 0.9 * (upper + e))
