import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobfractal import dfa
from lobfractal.dfa import (
    DEFAULT_BANDS,
    DFAConfig,
    FluctuationCurve,
    InsufficientData,
    InsufficientPoints,
    MissingNormalization,
    ScaleTooLarge,
    ScaleTooSmall,
    SeriesTooShort,
    ZeroFluctuationInRange,
    daily_alpha,
    fit_alpha,
    fluctuation,
    fluctuation_reference,
    local_alphas,
    profile,
    scale_grid,
    summarize_alphas,
)
from lobfractal.synth import GeneratorSpec, SignalKind, exponential_durations, generate, signal_to_durations

# Hand fit of the profile [.5, 0, .5, 0] on i = 1..4: slope -0.1, fitted
# values .4 .3 .2 .1, residuals .1 -.3 .3 -.1, mean square 0.2 / 4 = 0.05.
# Both windows are identical so F(4) = sqrt(0.05).
ALTERNATING_F4 = 0.22360679774997896


def piecewise_curve(slopes, knees, normalization=1000.0, c=2.0):
    """F continuous in log-log space with the given slopes between knees (in s/A)."""
    scales = np.unique(np.round(np.logspace(math.log10(3), 5, 400)).astype(np.int64))
    log_st = np.log10(scales / normalization)
    log_f = np.full(scales.size, math.log10(c))
    edges = [-np.inf, *np.log10(knees), np.inf]
    for k, slope in enumerate(slopes):
        lo, hi = edges[k], edges[k + 1]
        start = lo if np.isfinite(lo) else log_st[0]
        seg = np.clip(log_st, start, hi) - start
        log_f += slope * np.where(log_st > start, seg, 0.0)
    return FluctuationCurve(scales, 10**log_f, 4 * int(scales[-1]), normalization)


def test_profile_examples():
    assert profile([1, 2, 3]).tolist() == [-1.0, -1.0, 0.0]
    assert profile([4.2] * 4).tolist() == [0.0] * 4
    x = np.random.default_rng(0).standard_normal(1000)
    assert abs(profile(x)[-1]) < 1e-9 * np.abs(x).sum()
    with pytest.raises(dfa.EmptySeries):
        profile([])


def test_constant_series_zero_fluctuation():
    curve = fluctuation(np.full(256, 3.5), [4, 8, 16, 64])
    assert np.all(curve.fluctuations == 0)


def test_alternating_golden_value():
    x = [1, 0, 1, 0, 1, 0, 1, 0]
    assert fluctuation_reference(x, [4])[0] == pytest.approx(ALTERNATING_F4, rel=1e-12)
    # the optimized window kernel agrees on the same windows
    y = profile(x).reshape(2, 4)
    f2 = dfa._mean_sq_residual(y, dfa._window_basis(4, 1))
    assert math.sqrt(f2.mean()) == pytest.approx(ALTERNATING_F4, rel=1e-12)
    # eight samples hold only two windows of four, below the four-window floor
    with pytest.raises(ScaleTooLarge):
        fluctuation(x, [4])


def test_scale_preconditions():
    with pytest.raises(ScaleTooSmall):
        fluctuation(np.ones(100), [2])
    with pytest.raises(ScaleTooSmall):
        fluctuation(np.ones(100), [4], detrend_order=3)
    with pytest.raises(ScaleTooLarge):
        fluctuation(np.ones(100), [26])
    fluctuation(np.ones(100), [25])


def test_scale_grid():
    g = scale_grid(2**16)
    assert g[0] == 8 and g[-1] == 2**14
    assert np.all(np.diff(g) > 0)
    per_decade = g.size / math.log10(g[-1] / g[0])
    assert 17 <= per_decade <= 21
    assert scale_grid(31).size == 0


@pytest.mark.parametrize("order", [1, 2, 3])
@pytest.mark.parametrize("both_ends", [False, True])
def test_matches_reference(order, both_ends):
    rng = np.random.default_rng(order)
    x = rng.standard_normal(777).cumsum() + 5
    scales = np.arange(order + 2, 777 // 4 + 1)
    fast = fluctuation(x, scales, order, both_ends).fluctuations
    slow = fluctuation_reference(x, scales, order, both_ends)
    np.testing.assert_allclose(fast, slow, rtol=1e-10)


def test_piecewise_linear_profile_gives_zero():
    s = 16
    x = np.repeat(np.random.default_rng(1).standard_normal(40), s)
    f = fluctuation(x, [s]).fluctuations[0]
    assert f < 1e-12 * np.abs(x).max()


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.integers(64, 600),
    st.floats(-1e3, 1e3),
    st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3),
)
def test_shift_and_scale_invariance(seed, n, shift, c):
    x = np.random.default_rng(seed).standard_normal(n)
    scales = scale_grid(n)
    base = fluctuation(x, scales).fluctuations
    np.testing.assert_allclose(fluctuation(x + shift, scales).fluctuations, base, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(fluctuation(c * x, scales).fluctuations, abs(c) * base, rtol=1e-9)
    a = fit_alpha(FluctuationCurve(scales, base, n)).alpha
    b = fit_alpha(fluctuation(c * x, scales)).alpha
    assert b == pytest.approx(a, abs=1e-9)


def test_curve_invariants():
    with pytest.raises(ValueError):
        FluctuationCurve(np.array([8, 8]), np.array([1.0, 1.0]), 100)
    with pytest.raises(ScaleTooLarge):
        FluctuationCurve(np.array([8, 30]), np.array([1.0, 1.0]), 100)
    with pytest.raises(ValueError):
        FluctuationCurve(np.array([8, 16]), np.array([1.0, -1.0]), 100)


@pytest.mark.parametrize("beta", [0.3, 0.75, 1.2])
def test_exact_power_law(beta):
    scales = np.unique(np.round(np.logspace(1, 4, 20)).astype(int))
    fit = fit_alpha(FluctuationCurve(scales, 3.0 * scales**beta, 4 * int(scales[-1])))
    assert abs(fit.alpha - beta) < 1e-12
    assert fit.intercept == pytest.approx(math.log10(3.0), abs=1e-12)
    assert fit.n_points == scales.size and fit.r_squared == pytest.approx(1.0)


def test_fit_range_half_open():
    scales = np.array([10, 20, 40, 80])
    curve = FluctuationCurve(scales, scales**0.5, 400)
    assert fit_alpha(curve, (10, 80)).n_points == 3
    with pytest.raises(InsufficientPoints):
        fit_alpha(curve, (40, 80))


def test_zero_fluctuation_in_range():
    curve = FluctuationCurve(np.array([8, 16, 32]), np.array([0.0, 1.0, 2.0]), 200)
    with pytest.raises(ZeroFluctuationInRange):
        fit_alpha(curve)
    assert fit_alpha(curve, (8, 32)).alpha == pytest.approx(1.0)


def test_two_slope_curve():
    curve = piecewise_curve([0.6, 0.8], [1.0])
    assert abs(fit_alpha(curve, (0.003, 0.1), normalized=True).alpha - 0.6) < 1e-10
    assert abs(fit_alpha(curve, (10, 100), normalized=True).alpha - 0.8) < 1e-10


def test_three_slope_local_alphas():
    la = local_alphas(piecewise_curve([0.65, 0.72, 0.80], [0.2, 5.0]))
    assert not la.errors
    for fit, want in zip((la.alpha1, la.alpha2, la.alpha3), (0.65, 0.72, 0.80)):
        assert abs(fit.alpha - want) < 1e-10
        assert fit.normalized


def test_local_alphas_intra_day_only():
    x = np.random.default_rng(2).standard_normal(4000)
    curve = fluctuation(x, scale_grid(x.size)).with_normalization(4000)
    la = local_alphas(curve)
    assert la.alpha1 is not None
    assert la.alpha2 is None and la.alpha3 is None
    assert set(la.errors) == {"alpha2", "alpha3"}
    assert all("InsufficientPoints" in msg for msg in la.errors.values())


def test_local_alphas_need_normalization():
    with pytest.raises(MissingNormalization):
        local_alphas(FluctuationCurve(np.array([8, 16]), np.ones(2), 64))


def test_band_reference_ticks():
    # one day sits at log10(s/A) = 0, inside alpha2; a month (log10 30 = 1.48) sits in alpha3
    assert DEFAULT_BANDS["alpha2"][0] < 1.0 <= DEFAULT_BANDS["alpha2"][1]
    assert DEFAULT_BANDS["alpha3"][0] < 30 <= DEFAULT_BANDS["alpha3"][1]
    assert math.log10(30) == pytest.approx(1.48, abs=0.005)


def test_daily_alpha_iid():
    d = exponential_durations(4096, 300.0, np.random.default_rng(5))
    assert abs(daily_alpha(d).alpha - 0.5) <= 0.08


def test_daily_alpha_fgn():
    x = generate(GeneratorSpec(SignalKind.FGN, 2**15, seed=11, hurst=0.7))
    d = signal_to_durations(x, 500.0)
    assert abs(daily_alpha(d).alpha - 0.7) <= 0.05


def test_daily_alpha_too_short():
    with pytest.raises(SeriesTooShort):
        daily_alpha(np.ones(50))


def test_daily_alpha_intra_band():
    x = np.random.default_rng(3).standard_normal(3000)
    fit = daily_alpha(x, DFAConfig(fit_band="intra"))
    assert fit.normalized and fit.fit_range == DFAConfig().intra_band


def test_summarize():
    s = summarize_alphas([0.6, 0.8])
    assert s.mean == pytest.approx(0.7)
    assert s.std == pytest.approx(math.sqrt(0.02))
    assert s.ci95_half_width == pytest.approx(1.96 * s.std / math.sqrt(2))
    with pytest.raises(InsufficientData):
        summarize_alphas([0.5])


def test_to_json_roundtrips():
    import json

    curve = fluctuation(np.arange(100.0) % 7, [8, 16])
    assert json.loads(dfa.to_json(curve))["n_source"] == 100
    fit = fit_alpha(curve)
    assert json.loads(dfa.to_json(fit))["alpha"] == pytest.approx(fit.alpha)
