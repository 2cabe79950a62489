"""
Realized variance and alpha correlations
========================================

The realized variance averages 30 five-minute grids shifted by 10 s. Daily
alphas are then correlated with daily economic variables against the 1%
two-sided critical value.
"""

# %%
import math

import numpy as np

from lobfractal import MidPath, correlate, realized_variance
from lobfractal.synth import HELSINKI

# %%
# A single jump from 100 to 110 just before the first five-minute mark is seen
# once by every grid.
path = MidPath([HELSINKI.start, HELSINKI.start + 295_000], [100.0, 110.0])
print(f"RV = {realized_variance(path, HELSINKI):.6f}, ln(1.1)^2 = {math.log(1.1) ** 2:.6f}")

# %%
# A geometric random walk with per-second variance sigma^2 gives RV close to sigma^2 T.
rng = np.random.default_rng(0)
sigma, t_sec = 2e-4, (HELSINKI.end - HELSINKI.start) // 1000
times = HELSINKI.start + 1000 * np.arange(t_sec + 1)
mids = 50 * np.exp(np.concatenate([[0.0], np.cumsum(sigma * rng.standard_normal(t_sec))]))
print(f"RV = {realized_variance(MidPath(times, mids), HELSINKI):.3e}, sigma^2 T = {sigma**2 * t_sec:.3e}")

# %%
# 752 days where alpha rises with activity, and an unrelated control.
activity = rng.integers(800, 6000, 752).astype(float)
alpha = 0.6 + 2e-5 * activity + rng.normal(0, 0.04, 752)
for label, x in (("activity", activity), ("noise", rng.standard_normal(752))):
    res = correlate(alpha, x, ("alpha", label))
    print(f"alpha vs {label:<8} r = {res.r:+.3f}  |r| > {res.r_critical:.3f}? {res.significant_99}")
