"""
Scaling exponents of signals with known memory
==============================================

DFA of white noise gives alpha near 0.5, its running sum near 1.5, and
fractional Gaussian noise lands near its Hurst exponent.
"""

# %%
# Three test signals of length 2**14, seeded for repeatability.
import numpy as np

from lobfractal import GeneratorSpec, SignalKind, fit_alpha, fluctuation, generate, scale_grid

n = 2**14
signals = {
    "white": generate(GeneratorSpec(SignalKind.WHITE, n, seed=1)),
    "random walk": generate(GeneratorSpec(SignalKind.BROWNIAN_INCREMENTS_INTEGRATED, n, seed=1)),
    "fGn H=0.8": generate(GeneratorSpec(SignalKind.FGN, n, seed=1, hurst=0.8)),
}

# %%
# Fluctuation function over the default grid (8 to N/4, ~20 scales per decade).
scales = scale_grid(n)
print(f"{scales.size} scales from {scales[0]} to {scales[-1]}")

for name, x in signals.items():
    curve = fluctuation(x, scales)
    fit = fit_alpha(curve)
    print(f"{name:>12}: alpha = {fit.alpha:.3f} +/- {fit.ci95_half_width:.3f}  (R^2 {fit.r_squared:.4f})")

# %%
# The log-log points are what a plot would show; print a few of them.
curve = fluctuation(signals["fGn H=0.8"], scales)
for s, f in list(zip(curve.scales, curve.fluctuations))[::15]:
    print(f"log10 s = {np.log10(s):5.2f}   log10 F = {np.log10(f):6.3f}")
