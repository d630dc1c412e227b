"""
How large can the confounding bias get?
=======================================

Sweep the strength of confounding: beta1 controls how much z moves the
propensity, and alpha13 - alpha03 how differently z moves the two outcome
arms. Grid points that give an invalid population are skipped.
"""

import numpy as np

from tbpeval.bias import REGIONS, alpha13_interval, default_sweep_grid, sweep_bias
from tbpeval.populations import reference_pop1_spec

spec = reference_pop1_spec()
lo, hi = alpha13_interval(spec)
print(f"alpha13 keeps every outcome mean in [0, 1] on [{lo:.4f}, {hi:.4f}]")

beta1, diff = default_sweep_grid(spec, 60, 60)
table = sweep_bias(spec, beta1, diff)
print(f"{len(table)} valid grid points, {len(table.skipped)} skipped")

# Regions use the largest |bias(x)| over the four covariate points.
counts = {r: table.region.count(r) for r in REGIONS}
print("points per region:", counts)

# A coarse text map: rows are beta1 (top = strongest), columns alpha13 - alpha03.
symbol = dict(zip(REGIONS, "#+.o"))
grid = {(b, d): r for b, d, r in zip(table.beta1, table.a13_minus_a03, table.region)}
for b in beta1[::-6]:
    print(f"{b:5.2f} " + "".join(symbol.get(grid.get((b, d)), " ") for d in diff[::2]))

# The published configuration lands in the top region.
point = sweep_bias(spec, [spec.beta[1]], [spec.alpha1[3] - spec.alpha0[3]])
print("published point:", point.region[0], np.round(point.abs_bias[0], 4))
