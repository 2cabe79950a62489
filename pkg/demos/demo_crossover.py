"""
Local exponents across time scales
==================================

Daily series are joined end to end and the fluctuation curve is read on a
normalized axis s / A, where A is the mean number of events per day. Three
bands give the intra-day, around-one-day and multi-day exponents.
"""

# %%
import numpy as np

from lobfractal import DFAConfig, concat_days, local_alphas
from lobfractal.dfa import series_curve
from lobfractal.durations import DurationSeries, Variable
from lobfractal.events import Side
from lobfractal.synth import CorpusSpec, corpus_durations

# %%
# 240 synthetic days of trade gaps driven by one continuous fGn (H = 0.68).
spec = CorpusSpec(n_days=240, trades_per_day=1000, hurst=0.68, seed=3)
days = [DurationSeries("SYN", None, Side.BID, Variable.TR_TR, g) for g in corpus_durations(spec)]
joined = concat_days(days)
A = joined.n / len(days)
print(f"{joined.n} durations, A = {A:.0f} per day")

# %%
curve = series_curve(joined.values, DFAConfig()).with_normalization(A)
local = local_alphas(curve)
for name, fit in local.fits.items():
    if fit is None:
        print(f"{name}: {local.errors[name]}")
    else:
        lo, hi = fit.fit_range
        print(f"{name} over ({lo:g}, {hi:g}] days: {fit.alpha:.3f} from {fit.n_points} scales")

# %%
# The band edges on the log axis, for orientation: one day sits at 0, a month at 1.48.
print("log10 of band edges:", {k: np.round(np.log10(v), 2).tolist() for k, v in
                                (("alpha1", (0.003, 0.1)), ("alpha2", (0.3, 3)), ("alpha3", (10, 100)))})
