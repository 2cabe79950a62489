"""End-to-end runs: message logs -> durations -> DFA -> crossovers -> economics.

A run reads every ``<stock>_<yyyymmdd>.(csv|lob)`` file matched by the
config, processes days independently (optionally in a process pool), then
reduces in sorted (stock, side, variable, day) order and writes six CSV
products plus ``manifest.json``. Floats are written with 12 significant
digits so reruns are byte-identical.
"""

from __future__ import annotations

import glob
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from itertools import repeat
from pathlib import Path
from typing import Any

import numpy as np

from . import dfa
from .book import BookError, replay_with_mid_path
from .cache import ReplayCache, cache_key
from .durations import DEFAULT_BEST_ONLY, EventTable, Variable, event_table, extract_series
from .econ import ECON_FIELDS, DailyEcon, EmptyDay, MidPath, correlate, daily_economics
from .econ import EconError
from .events import LogFormatError, SessionWindow, Side, apply_session_filter, parse_binary_log, parse_csv_log, parse_log_name

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

EXIT_CLEAN, EXIT_FAILED, EXIT_PARTIAL = 0, 1, 2
PRODUCTS = (
    "daily_alpha.csv",
    "alpha_summary.csv",
    "fluctuation_curves.csv",
    "local_alphas.csv",
    "daily_econ.csv",
    "correlations.csv",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    stocks: list[str] = field(default_factory=list)
    session: SessionWindow = field(default_factory=lambda: SessionWindow.from_clock("07:00", "15:30", 30))
    session_overrides: dict[str, SessionWindow] = field(default_factory=dict)
    variables: list[Variable] = field(default_factory=lambda: list(Variable))
    sides: list[Side] = field(default_factory=lambda: [Side.BID, Side.ASK])
    best_only: dict[Variable, bool] = field(default_factory=lambda: dict(DEFAULT_BEST_ONLY))
    drop_zeros: bool = False
    deletes_are_cancels: bool = True
    dfa: dfa.DFAConfig = field(default_factory=dfa.DFAConfig)
    bands: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(dfa.DEFAULT_BANDS))
    rv_grid_seconds: int = 300
    rv_offsets: int = 30
    out_dir: Path = Path("out")
    jobs: int = 1
    seed: int = 0
    cache: bool = True
    base_dir: Path = Path(".")

    def session_for(self, stock: str) -> SessionWindow:
        return self.session_overrides.get(stock, self.session)

    def input_files(self) -> list[Path]:
        """Resolve globs/paths; fails if an explicit path is missing or a glob is empty."""
        found: set[Path] = set()
        for pattern in self.inputs:
            full = pattern if Path(pattern).is_absolute() else str(self.base_dir / pattern)
            if glob.has_magic(full):
                matches = [Path(p) for p in glob.glob(full)]
                if not matches:
                    raise ConfigError(f"input pattern {pattern!r} matches no files")
            else:
                if not Path(full).is_file():
                    raise ConfigError(f"input file {pattern!r} does not exist")
                matches = [Path(full)]
            for p in matches:
                try:
                    stock, _, _ = parse_log_name(p)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
                if not self.stocks or stock in self.stocks:
                    found.add(p)
        return sorted(found, key=lambda p: (parse_log_name(p)[0], parse_log_name(p)[1], p.name))

    def validate(self) -> None:
        for name, (lo, hi) in self.bands.items():
            if not 0 < lo < hi:
                raise ConfigError(f"band {name} must satisfy 0 < lo < hi, got ({lo}, {hi})")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if not self.variables or not self.sides:
            raise ConfigError("variables and sides must be non-empty")
        ms = self.rv_grid_seconds * 1000
        if ms <= 0 or self.rv_offsets < 1 or ms % self.rv_offsets:
            raise ConfigError("rv grid (ms) must be a positive multiple of rv offsets")
        if not self.inputs:
            raise ConfigError("no inputs configured")
        self.input_files()

    def describe(self) -> dict[str, Any]:
        """Stable JSON-ready view recorded in the manifest."""
        def window(w: SessionWindow) -> dict[str, int]:
            return {"open": w.open, "close": w.close, "trim": w.trim}

        return {
            "inputs": list(self.inputs),
            "stocks": list(self.stocks),
            "session": window(self.session),
            "session_overrides": {k: window(v) for k, v in sorted(self.session_overrides.items())},
            "variables": [v.value for v in self.variables],
            "sides": [s.name for s in self.sides],
            "best_only": {v.value: b for v, b in self.best_only.items()},
            "drop_zeros": self.drop_zeros,
            "deletes_are_cancels": self.deletes_are_cancels,
            "dfa": {
                "order": self.dfa.order,
                "s_min": self.dfa.s_min,
                "per_decade": self.dfa.per_decade,
                "min_length": self.dfa.min_length,
                "both_ends": self.dfa.both_ends,
                "fit_band": self.dfa.fit_band,
                "bands": {k: list(v) for k, v in self.bands.items()},
            },
            "econ": {"rv_grid_seconds": self.rv_grid_seconds, "rv_offsets": self.rv_offsets},
            "seed": self.seed,
        }


def _as_bool(value: Any, name: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise ConfigError(f"{name} must be true or false")


def _window(section: dict[str, Any], default: SessionWindow | None = None) -> SessionWindow:
    from .events import clock_to_ms

    open_ms = clock_to_ms(section["open"]) if "open" in section else default.open
    close_ms = clock_to_ms(section["close"]) if "close" in section else default.close
    if "trim_minutes" in section:
        trim = int(round(float(section["trim_minutes"]) * 60_000))
    else:
        trim = default.trim if default else 1_800_000
    try:
        return SessionWindow(open_ms, close_ms, trim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(raw: dict[str, Any], base_dir: str | Path = ".") -> RunConfig:
    """Build a :class:`RunConfig` from the parsed TOML sections.

    Unknown sections or keys are rejected so typos do not silently fall back
    to defaults.
    """
    known = {"input", "session", "replay", "durations", "dfa", "econ", "output"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = RunConfig(base_dir=Path(base_dir))

    inp = dict(raw.get("input", {}))
    paths = inp.pop("paths", [])
    cfg.inputs = [paths] if isinstance(paths, str) else list(paths)
    cfg.stocks = list(inp.pop("stocks", []))
    _no_leftovers("input", inp)

    sess = dict(raw.get("session", {}))
    per_stock = sess.pop("stock", {})
    if sess:
        cfg.session = _window(sess, cfg.session)
    cfg.session_overrides = {k: _window(v, cfg.session) for k, v in per_stock.items()}

    rep = dict(raw.get("replay", {}))
    cfg.deletes_are_cancels = _as_bool(rep.pop("deletes_are_cancels", True), "deletes_are_cancels")
    _no_leftovers("replay", rep)

    dur = dict(raw.get("durations", {}))
    try:
        if "variables" in dur:
            cfg.variables = [Variable.parse(v) for v in dur.pop("variables")]
        if "sides" in dur:
            cfg.sides = [Side[s.upper()] for s in dur.pop("sides")]
        for var, flag in dur.pop("best_only", {}).items():
            cfg.best_only[Variable.parse(var)] = _as_bool(flag, f"best_only.{var}")
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad [durations] entry: {exc}") from None
    cfg.drop_zeros = _as_bool(dur.pop("drop_zeros", False), "drop_zeros")
    _no_leftovers("durations", dur)

    d = dict(raw.get("dfa", {}))
    bands = d.pop("bands", None)
    if bands is not None:
        cfg.bands = {k: (float(v[0]), float(v[1])) for k, v in bands.items()}
    try:
        cfg.dfa = dfa.DFAConfig(
            order=int(d.pop("order", 1)),
            s_min=int(d.pop("s_min", 8)),
            per_decade=int(d.pop("per_decade", 20)),
            min_length=int(d.pop("min_length", 64)),
            both_ends=_as_bool(d.pop("both_ends", False), "both_ends"),
            fit_band=str(d.pop("fit_band", "full")),
            intra_band=cfg.bands.get("alpha1", dfa.DEFAULT_BANDS["alpha1"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _no_leftovers("dfa", d)

    e = dict(raw.get("econ", {}))
    cfg.rv_grid_seconds = int(e.pop("rv_grid_seconds", 300))
    cfg.rv_offsets = int(e.pop("rv_offsets", 30))
    _no_leftovers("econ", e)

    o = dict(raw.get("output", {}))
    cfg.out_dir = Path(o.pop("dir", "out"))
    if not cfg.out_dir.is_absolute():
        cfg.out_dir = cfg.base_dir / cfg.out_dir
    cfg.jobs = int(o.pop("jobs", 1))
    cfg.seed = int(o.pop("seed", 0))
    cfg.cache = _as_bool(o.pop("cache", True), "cache")
    _no_leftovers("output", o)
    return cfg


def _no_leftovers(section: str, rest: dict[str, Any]) -> None:
    if rest:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(rest)}")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(raw, path.parent)


# -- per-day work ----------------------------------------------------------


@dataclass
class DayResult:
    file: str
    stock: str
    day: date
    status: str = "ok"  # or "error"
    reason: str = ""
    series: dict[tuple[Variable, Side], np.ndarray] = field(default_factory=dict)
    fits: dict[tuple[Variable, Side], dfa.ScalingFit | str] = field(default_factory=dict)
    econ: dict[tuple[Variable, Side], DailyEcon] = field(default_factory=dict)


def replay_file(path: Path, config: RunConfig) -> tuple[EventTable, MidPath, SessionWindow]:
    """Parse, filter and replay one day file, going through the cache when enabled."""
    stock, _, ext = parse_log_name(path)
    session = config.session_for(stock)
    raw = path.read_bytes()
    key = cache_key(raw, session=[session.open, session.close, session.trim],
                    deletes_are_cancels=config.deletes_are_cancels)
    cache = ReplayCache(config.out_dir / "cache") if config.cache else None
    hit = cache.load(key) if cache else None
    if hit is not None:
        table, mid = hit
        return table, MidPath.from_replay(mid), session
    records = parse_binary_log(raw) if ext == "lob" else parse_csv_log(raw)
    records = apply_session_filter(records, session)
    replay, _ = replay_with_mid_path(records, config.deletes_are_cancels)
    if cache:
        cache.store(key, replay.events, replay.mid_path)
    return event_table(replay.events), MidPath.from_replay(replay.mid_path), session


def process_day(path: Path, config: RunConfig) -> DayResult:
    stock, day, _ = parse_log_name(path)
    result = DayResult(path.name, stock, day)
    try:
        table, mid, session = replay_file(path, config)
    except (LogFormatError, BookError, OSError) as exc:
        result.status = "error"
        result.reason = f"{type(exc).__name__}: {exc}"
        return result
    for variable in config.variables:
        for side in config.sides:
            key = (variable, side)
            series = extract_series(table, variable, side, config.best_only[variable],
                                    config.drop_zeros, stock, day)
            result.series[key] = series.values
            try:
                result.fits[key] = dfa.daily_alpha(series, config.dfa)
            except dfa.DFAError as exc:
                result.fits[key] = f"{type(exc).__name__}: {exc}"
            try:
                result.econ[key] = daily_economics(
                    series, table, mid, session, config.best_only[variable],
                    config.rv_grid_seconds, config.rv_offsets,
                )
            except EmptyDay:
                pass
    return result


# -- reduction and output ---------------------------------------------------


def _f(v: float | None) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _row(*values) -> str:
    return ",".join(v if isinstance(v, str) else _f(v) for v in values) + "\n"


@dataclass
class RunReport:
    out_dir: Path
    products: list[Path]
    manifest: Path
    days: list[dict[str, Any]]
    skipped_days: list[dict[str, str]]
    status: str

    @property
    def exit_code(self) -> int:
        return {"clean": EXIT_CLEAN, "partial": EXIT_PARTIAL}.get(self.status, EXIT_FAILED)


def run_pipeline(config: RunConfig) -> RunReport:
    """Run the whole analysis described by ``config`` and write its products.

    Config problems raise :class:`ConfigError` before any work starts. Days whose
    file cannot be parsed or replayed are skipped and listed in the manifest;
    the run status is ``clean`` (nothing skipped), ``partial`` or ``failed``
    (no usable day).
    """
    config.validate()
    files = config.input_files()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if config.jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            days = list(pool.map(process_day, files, repeat(config), chunksize=4))
    else:
        days = [process_day(p, config) for p in files]
    days.sort(key=lambda d: (d.stock, d.day, d.file))

    good = [d for d in days if d.status == "ok"]
    skipped_days = [{"file": d.file, "reason": d.reason} for d in days if d.status != "ok"]
    for s in skipped_days:
        log.warning("skipped %s: %s", s["file"], s["reason"])
    stocks = sorted({d.stock for d in good})

    buffers = {name: io.StringIO() for name in PRODUCTS}
    buffers["daily_alpha.csv"].write(
        "stock,day,side,variable,n,alpha,intercept,r_squared,stderr_alpha,n_points,fit_lo,fit_hi\n")
    buffers["alpha_summary.csv"].write("stock,side,variable,n_days,mean,std,ci95_half_width,status\n")
    buffers["fluctuation_curves.csv"].write(
        "stock,side,variable,n_source,normalization,scale,normalized_scale,fluctuation\n")
    buffers["local_alphas.csv"].write(
        "stock,side,variable,band,lo,hi,alpha,intercept,r_squared,stderr_alpha,ci95_half_width,n_points,status\n")
    buffers["daily_econ.csv"].write("stock,day,side,variable," + ",".join(ECON_FIELDS) + "\n")
    buffers["correlations.csv"].write(
        "stock,side,variable,econ_variable,n,r,r_critical,significant_99,status\n")

    skipped_series: list[dict[str, str]] = []
    for stock in stocks:
        stock_days = [d for d in good if d.stock == stock]
        for variable in config.variables:
            per_side_alpha: dict[Side, dict[date, float]] = {}
            per_side_econ: dict[Side, dict[date, DailyEcon]] = {}
            for side in config.sides:
                key = (variable, side)
                tag = f"{stock},{side.name},{variable.value}"
                fits = []
                alpha_by_day: dict[date, float] = {}
                econ_by_day: dict[date, DailyEcon] = {}
                for d in stock_days:
                    fit = d.fits[key]
                    if isinstance(fit, str):
                        skipped_series.append({"stock": stock, "day": d.day.isoformat(), "side": side.name,
                                               "variable": variable.value, "reason": fit})
                    else:
                        fits.append(fit)
                        alpha_by_day[d.day] = fit.alpha
                        buffers["daily_alpha.csv"].write(_row(
                            stock, d.day.isoformat(), side.name, variable.value, len(d.series[key]),
                            fit.alpha, fit.intercept, fit.r_squared, fit.stderr_alpha, fit.n_points,
                            fit.fit_range[0], fit.fit_range[1]))
                    if key in d.econ:
                        econ_by_day[d.day] = d.econ[key]
                        e = d.econ[key]
                        buffers["daily_econ.csv"].write(_row(
                            stock, d.day.isoformat(), side.name, variable.value,
                            *[getattr(e, f) for f in ECON_FIELDS]))
                per_side_alpha[side] = alpha_by_day
                per_side_econ[side] = econ_by_day

                try:
                    summ = dfa.summarize_alphas(fits)
                    buffers["alpha_summary.csv"].write(
                        _row(tag, summ.n_days, summ.mean, summ.std, summ.ci95_half_width, "ok"))
                except dfa.InsufficientData as exc:
                    buffers["alpha_summary.csv"].write(_row(tag, len(fits), None, None, None,
                                                            f"InsufficientData: {exc}"))

                _crossover(stock_days, key, tag, config, buffers)

                _correlations(tag, alpha_by_day, econ_by_day, buffers["correlations.csv"])

            if len(config.sides) == 2:
                pooled_alpha, pooled_econ = _pool_sides(per_side_alpha, per_side_econ)
                _correlations(f"{stock},POOLED,{variable.value}", pooled_alpha, pooled_econ,
                              buffers["correlations.csv"])

    products = []
    entries = []
    for name in PRODUCTS:
        data = buffers[name].getvalue().encode("utf-8")
        path = out / name
        path.write_bytes(data)
        products.append(path)
        entries.append({"name": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data),
                        "rows": data.count(b"\n") - 1})

    if not good:
        status = "failed"
    elif skipped_days:
        status = "partial"
    else:
        status = "clean"
    day_entries = [{"file": d.file, "stock": d.stock, "day": d.day.isoformat(), "status": d.status,
                    **({"reason": d.reason} if d.reason else {})} for d in days]
    manifest = {
        "version": 1,
        "status": status,
        "config": config.describe(),
        "products": entries,
        "days": day_entries,
        "skipped_days": skipped_days,
        "skipped_series": skipped_series,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RunReport(out, products, manifest_path, day_entries, skipped_days, status)


def _crossover(stock_days: list[DayResult], key, tag: str, config: RunConfig, buffers) -> None:
    daily = [d.series[key] for d in stock_days]
    total = sum(int(v.size) for v in daily)
    band_names = list(config.bands)
    if total == 0 or not daily:
        for name in band_names:
            lo, hi = config.bands[name]
            buffers["local_alphas.csv"].write(_row(tag, name, lo, hi, *[None] * 6, "EmptySeries"))
        return
    concat = np.concatenate(daily)
    normalization = total / len(daily)
    scales = dfa.scale_grid(concat.size, config.dfa.s_min, config.dfa.per_decade)
    if scales.size < 2:
        for name in band_names:
            lo, hi = config.bands[name]
            buffers["local_alphas.csv"].write(_row(tag, name, lo, hi, *[None] * 6, "SeriesTooShort"))
        return
    curve = dfa.fluctuation(concat, scales, config.dfa.order, config.dfa.both_ends)
    curve = curve.with_normalization(normalization)
    for s, sn, f in zip(curve.scales.tolist(), curve.normalized_scales.tolist(), curve.fluctuations.tolist()):
        buffers["fluctuation_curves.csv"].write(_row(tag, curve.n_source, normalization, s, sn, f))
    local = dfa.local_alphas(curve, config.bands)
    for name in band_names:
        lo, hi = config.bands[name]
        fit = local.fits[name]
        if fit is None:
            buffers["local_alphas.csv"].write(_row(tag, name, lo, hi, *[None] * 6, local.errors[name].split(":")[0]))
        else:
            buffers["local_alphas.csv"].write(_row(
                tag, name, lo, hi, fit.alpha, fit.intercept, fit.r_squared, fit.stderr_alpha,
                fit.ci95_half_width, fit.n_points, "ok"))


def _correlations(tag: str, alpha_by_day: dict[date, float], econ_by_day: dict[date, Any], out) -> None:
    days = sorted(set(alpha_by_day) & set(econ_by_day))
    alphas = [alpha_by_day[d] for d in days]
    for fname in ECON_FIELDS:
        xs = [float(getattr(econ_by_day[d], fname)) for d in days]
        try:
            res = correlate(alphas, xs, ("alpha", fname))
            out.write(_row(tag, fname, res.n, res.r, res.r_critical, bool(res.significant_99), "ok"))
        except EconError as exc:
            n = sum(1 for a, x in zip(alphas, xs) if math.isfinite(a) and math.isfinite(x))
            out.write(_row(tag, fname, n, None, None, "", type(exc).__name__))


@dataclass
class _Pooled:
    avg_duration_ms: float
    activity: float
    avg_quantity: float
    daily_log_return: float
    realized_variance: float


def _pool_sides(alpha: dict[Side, dict[date, float]], econ: dict[Side, dict[date, DailyEcon]]):
    """Per-day mean over the two sides, kept only where both sides are present."""
    bid_a, ask_a = alpha[Side.BID], alpha[Side.ASK]
    bid_e, ask_e = econ[Side.BID], econ[Side.ASK]
    days = sorted(set(bid_a) & set(ask_a) & set(bid_e) & set(ask_e))
    pooled_alpha = {d: 0.5 * (bid_a[d] + ask_a[d]) for d in days}
    pooled_econ = {
        d: _Pooled(*[0.5 * (float(getattr(bid_e[d], f)) + float(getattr(ask_e[d], f))) for f in ECON_FIELDS])
        for d in days
    }
    return pooled_alpha, pooled_econ
