"""Acceptance criteria, one test each, each printing a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from lobfractal import dfa
from lobfractal.book import Kind, replay_day
from lobfractal.cli import main
from lobfractal.econ import MidPath, correlate, realized_variance
from lobfractal.dfa import FluctuationCurve, fit_alpha, fluctuation, fluctuation_reference, local_alphas, series_curve
from lobfractal.pipeline import PRODUCTS, RunConfig, run_pipeline
from lobfractal.synth import HELSINKI, CorpusSpec, GeneratorSpec, SignalKind, generate, random_valid_stream, write_corpus

from test_dfa import piecewise_curve
from conftest import GOLDEN_EVENTS


def _ensemble(kind, seeds, length, hurst=None):
    return np.array([fit_alpha(series_curve(generate(GeneratorSpec(kind, length, s, hurst)))).alpha for s in seeds])


def test_exponent_semantics(acceptance):
    t0 = time.perf_counter()
    white = _ensemble(SignalKind.WHITE, range(50), 2**16).mean()
    walk = _ensemble(SignalKind.BROWNIAN_INCREMENTS_INTEGRATED, range(50), 2**16).mean()
    elapsed = time.perf_counter() - t0
    ok = 0.48 <= white <= 0.52 and 1.45 <= walk <= 1.55 and elapsed < 60
    acceptance("exponent semantics", ok, f"white {white:.4f} in [0.48,0.52], integrated {walk:.4f} in [1.45,1.55], {elapsed:.1f}s < 60s")
    assert ok


def test_fgn_recovery(acceptance):
    t0 = time.perf_counter()
    hs = (0.55, 0.65, 0.75, 0.85)
    means = [_ensemble(SignalKind.FGN, range(20), 2**16, h).mean() for h in hs]
    elapsed = time.perf_counter() - t0
    worst = max(abs(m - h) for m, h in zip(means, hs))
    ok = worst <= 0.03 and all(np.diff(means) > 0) and elapsed < 120
    detail = ", ".join(f"H={h}: {m:.4f}" for h, m in zip(hs, means))
    acceptance("fGn recovery", ok, f"{detail}; max |err| {worst:.4f} <= 0.03, increasing, {elapsed:.1f}s < 120s")
    assert ok


def test_oracle_equivalence(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(16, 2049))
        order = int(rng.integers(1, 4))
        x = rng.standard_normal(n) * rng.uniform(0.01, 100) + rng.uniform(-50, 50)
        if rng.random() < 0.5:
            x = np.cumsum(x)
        scales = np.arange(order + 2, n // 4 + 1)
        fast = fluctuation(x, scales, order).fluctuations
        slow = fluctuation_reference(x, scales, order)
        worst = max(worst, float(np.max(np.abs(fast - slow) / slow)))
    ok = worst <= 1e-10
    acceptance("oracle equivalence", ok, f"max relative error {worst:.2e} <= 1e-10 over 100 series, all scales")
    assert ok


def test_exact_power_law(acceptance):
    scales = np.unique(np.round(np.logspace(np.log10(8), 5, 60)).astype(np.int64))
    errs = {}
    for beta in (0.3, 0.75, 1.2):
        curve = FluctuationCurve(scales, 2.5 * scales.astype(float) ** beta, 4 * int(scales[-1]))
        errs[beta] = abs(fit_alpha(curve).alpha - beta)
    ok = max(errs.values()) <= 1e-12
    acceptance("exact power law", ok, ", ".join(f"beta {b}: err {e:.1e}" for b, e in errs.items()) + " <= 1e-12")
    assert ok


def test_piecewise_crossover(acceptance):
    worst = 0.0
    cases = [(0.65, 0.72, 0.80), (0.5, 0.9, 1.3), (1.1, 0.6, 0.75)]
    for slopes in cases:
        la = local_alphas(piecewise_curve(list(slopes), [0.2, 5.0]))
        got = (la.alpha1.alpha, la.alpha2.alpha, la.alpha3.alpha)
        worst = max(worst, max(abs(g - s) for g, s in zip(got, slopes)))
    ok = worst <= 1e-10
    acceptance("piecewise crossover", ok, f"max slope error {worst:.1e} <= 1e-10 over bands (0.003,0.1], (0.3,3], (10,100]")
    assert ok


def _tr_tr_mean(out_dir):
    for line in (out_dir / "alpha_summary.csv").read_text().splitlines()[1:]:
        stock, side, variable, n_days, mean = line.split(",")[:5]
        if side == "BID" and variable == "tr-tr":
            return int(n_days), float(mean)
    raise AssertionError("no tr-tr summary row")


@pytest.mark.slow
def test_end_to_end_pipeline(acceptance, tmp_path):
    results = {}
    elapsed = 0.0
    for label, hurst, fmt, target in (("fGn", 0.68, "csv", 0.68), ("iid", None, "lob", 0.5)):
        write_corpus(CorpusSpec(n_days=200, hurst=hurst, seed=7, stock="E2E"), tmp_path / label, fmt)
        t0 = time.perf_counter()
        report = run_pipeline(RunConfig(inputs=[str(tmp_path / label / "E2E_*")], out_dir=tmp_path / f"out_{label}"))
        elapsed += time.perf_counter() - t0
        n_days, mean = _tr_tr_mean(tmp_path / f"out_{label}")
        results[label] = (mean, target, n_days, report.status)
    ok = all(abs(m - t) <= 0.02 and n == 200 and st == "clean" for m, t, n, st in results.values()) and elapsed < 300
    detail = ", ".join(f"{k} mean {m:.4f} (target {t} +/- 0.02, {n} days, {st})" for k, (m, t, n, st) in results.items())
    acceptance("end-to-end pipeline", ok, f"{detail}; pipeline {elapsed:.1f}s < 300s")
    assert ok


def test_book_engine_fixtures(acceptance):
    out = replay_day(GOLDEN_EVENTS)
    got = [(e.kind, e.side.name, e.at_best, e.lifetime_ms) for e in out]
    want = [
        (Kind.ORDER, "BID", False, None),
        (Kind.ORDER, "ASK", False, None),
        (Kind.TRADE, "ASK", True, 150),
        (Kind.CANCEL, "BID", True, 500),
        (Kind.ORDER, "BID", False, None),
        (Kind.ORDER, "BID", True, None),
    ]
    golden_ok = got == want and [e.timestamp for e in out] == [e.timestamp for e in GOLDEN_EVENTS]
    stream = random_valid_stream(100_000, seed=99)
    try:
        classified = replay_day(stream, check_invariants=True)
        violations = 0
    except AssertionError:
        classified, violations = [], 1
    ok = golden_ok and violations == 0 and len(classified) == len(stream)
    acceptance("book-engine fixtures", ok,
               f"golden trace {'matches' if golden_ok else 'differs'}; 1e5-event stream, {violations} invariant violations")
    assert ok


def test_realized_variance(acceptance):
    two_point = MidPath([HELSINKI.start, HELSINKI.start + 295_000], [100.0, 110.0])
    err = abs(realized_variance(two_point, HELSINKI) - math.log(1.1) ** 2)
    const = realized_variance(MidPath([HELSINKI.start], [77.0]), HELSINKI)
    sigma = 2e-4
    t_sec = (HELSINKI.end - HELSINKI.start) // 1000
    times = HELSINKI.start + 1000 * np.arange(t_sec + 1)
    rvs = []
    for seed in range(50):
        steps = sigma * np.random.default_rng(seed).standard_normal(t_sec)
        rvs.append(realized_variance(MidPath(times, 20.0 * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))), HELSINKI))
    rel = abs(np.mean(rvs) / (sigma**2 * t_sec) - 1)
    ok = err <= 1e-12 and const == 0.0 and rel <= 0.15
    acceptance("realized variance", ok,
               f"two-point error {err:.1e} <= 1e-12, constant {const}, random walk off by {100 * rel:.1f}% <= 15%")
    assert ok


def test_correlation_null_calibration(acceptance):
    hits = 0
    for trial in range(100):
        rng = np.random.default_rng([31, trial])
        hits += correlate(rng.standard_normal(752), rng.standard_normal(752)).significant_99
    ok = hits <= 3
    acceptance("correlation null calibration", ok, f"{hits}/100 trials significant at 0.01 (<= 3)")
    assert ok


@pytest.mark.slow
def test_performance(acceptance, tmp_path):
    x = np.random.default_rng(1).standard_normal(10**6)
    t0 = time.perf_counter()
    dfa.daily_alpha(x)
    t_dfa = time.perf_counter() - t0

    t0 = time.perf_counter()
    write_corpus(CorpusSpec(n_days=752, seed=3, stock="PERF"), tmp_path / "in", "lob")
    t_synth = time.perf_counter() - t0
    t0 = time.perf_counter()
    report = run_pipeline(RunConfig(inputs=[str(tmp_path / "in" / "*.lob")], out_dir=tmp_path / "out", jobs=4))
    t_run = time.perf_counter() - t0
    n_days, mean = _tr_tr_mean(tmp_path / "out")
    ok = t_dfa < 5 and t_run < 900 and report.status == "clean" and n_days == 752
    acceptance("performance", ok,
               f"DFA of 1e6 points {t_dfa:.2f}s < 5s; 752-day pipeline with 4 workers {t_run:.0f}s < 900s "
               f"({report.status}, tr-tr mean {mean:.4f}; corpus synthesis {t_synth:.0f}s not counted)")
    assert ok


def test_determinism(acceptance, tmp_path):
    write_corpus(CorpusSpec(n_days=8, trades_per_day=2000, seed=5, stock="DET"), tmp_path / "in", "csv")
    codes = [main(["run", str(tmp_path / "in" / "*.csv"), "--out", str(tmp_path / name)]) for name in ("a", "b")]
    names = [*PRODUCTS, "manifest.json"]
    same = [(tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names]
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    ok = codes == [0, 0] and all(same) and manifest["status"] == "clean"
    acceptance("determinism", ok, f"{sum(same)}/{len(names)} files byte-identical across two run invocations")
    assert ok
