"""
Closed forms for a continuous population
========================================

Uniform covariates, a Gaussian outcome, propensity equal to the confounder z
and the predictor h = x1 + x2, whose law is triangular on [0, 2].
"""

import numpy as np

from tbpeval.bias import pop2_evaluation
from tbpeval.populations import pop2_calibration, pop2_calibration_deviation, pop2_metrics, pop2_moments

# Exact expectations, kept as fractions.
for name, value in pop2_moments().items():
    print(f"{name:>9} = {value}")

adj = pop2_metrics()
print(f"C_b(h) = {adj.cb:.7f}")
print(f"C_b(tau_s) = {pop2_metrics(predictor='tau_s').cb:.7f}")
print(f"naive C_b(h) = {pop2_metrics(adjusted=False).cb:.8f}")

# The calibration curve is 3h/4 below h = 1 and (2 + h)/4 above it. The
# naive curve adds E[bias(X) | H = h], the average of the bias over the
# slice of x2 values compatible with h.
h = np.array([0.25, 0.5, 1.0, 1.5, 1.75])
table = np.column_stack([h, pop2_calibration(h), pop2_calibration(h, adjusted=False),
                         pop2_calibration_deviation(h)])
print("     h  adjusted  naive    deviation")
for row in table:
    print("  ".join(f"{v:7.4f}" for v in row))

# The naive curve sits above the adjusted one while its C_b is lower.
ev = pop2_evaluation()
print(f"C_b deviation = {ev.deviation.cb_deviation:.7f}")

# Concentration curves: share of the total benefit held by the lowest-ranked
# fraction of the population.
share = np.array([0.25, 0.5, 0.75])
print("population share      ", share)
print("benefit share, adjusted", np.interp(share, ev.rcc.x, ev.rcc.y).round(4))
print("benefit share, naive   ", np.interp(share, ev.rcc_naive.x, ev.rcc_naive.y).round(4))
