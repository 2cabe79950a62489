"""Command-line entry point: ``lobfractal <subcommand> ...``.

Exit codes: 0 clean, 2 partial (some days skipped), 1 failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

from . import dfa
from .book import BookError, replay_with_mid_path
from .durations import (
    DurationSeries,
    Variable,
    concat_days,
    encode_duration_binary,
    event_table,
    extract_series,
    read_duration_csv,
    write_duration_csv,
)
from .econ import ECON_FIELDS, EmptyDay, MidPath, correlate, daily_economics, econ_to_csv
from .events import LogFormatError, apply_session_filter, parse_log_name, read_log, write_log
from .pipeline import (
    EXIT_CLEAN,
    EXIT_FAILED,
    ConfigError,
    RunConfig,
    _f,
    load_config,
    run_pipeline,
)
from .synth import CorpusSpec, GeneratorSpec, generate, write_corpus, write_signal_csv
from .validation import format_checks, validate_suite

log = logging.getLogger("lobfractal")


def _bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out:
        cfg.out_dir = Path(args.out)
    if args.jobs:
        cfg.jobs = args.jobs
    if args.seed is not None:
        cfg.seed = args.seed
    for name in ("deletes_are_cancels", "drop_zeros"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "both_ends", None) is not None or getattr(args, "fit_band", None):
        cfg.dfa = replace(
            cfg.dfa,
            both_ends=cfg.dfa.both_ends if args.both_ends is None else args.both_ends,
            fit_band=args.fit_band or cfg.dfa.fit_band,
        )
    if getattr(args, "rv_offsets", None):
        cfg.rv_offsets = args.rv_offsets
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _load_day(path: str, cfg: RunConfig):
    stock, day, _ = parse_log_name(path)
    session = cfg.session_for(stock)
    records = apply_session_filter(read_log(path), session)
    return stock, day, session, records


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    cfg = _config(args)
    stock, day, session, records = _load_day(args.file, cfg)
    counts = defaultdict(int)
    for r in records:
        counts[r.event_type.name] += 1
    summary = {"stock": stock, "day": day.isoformat(), "session": [session.start, session.end],
               "records": len(records), "by_type": dict(sorted(counts.items()))}
    if args.to:
        write_log(records, args.to)
        summary["written"] = str(args.to)
    print(json.dumps(summary, indent=2))
    return EXIT_CLEAN


def cmd_replay(args) -> int:
    cfg = _config(args)
    stock, day, _, records = _load_day(args.file, cfg)
    replay, dumped = replay_with_mid_path(records, cfg.deletes_are_cancels, dump_at=args.dump_book_at)
    out = _out_dir(cfg)
    target = out / f"{stock}_{day:%Y%m%d}_classified.csv"
    with target.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,kind,side,at_best,order_id,lifetime_ms,quantity,price\n")
        for e in replay.events:
            life = "" if e.lifetime_ms is None else e.lifetime_ms
            fh.write(f"{e.timestamp},{e.kind.name},{e.side.name},{int(e.at_best)},{e.order_id},"
                     f"{life},{e.quantity},{e.price}\n")
    print(target)
    if dumped is not None:
        dump = out / f"{stock}_{day:%Y%m%d}_book_{args.dump_book_at}.json"
        dump.write_text(dumped.to_json() + "\n", encoding="utf-8")
        print(dump)
    return EXIT_CLEAN


def _day_series(path: str, cfg: RunConfig) -> list[DurationSeries]:
    stock, day, _, records = _load_day(path, cfg)
    replay, _ = replay_with_mid_path(records, cfg.deletes_are_cancels)
    table = event_table(replay.events)
    return [
        extract_series(table, v, s, cfg.best_only[v], cfg.drop_zeros, stock, day)
        for v in cfg.variables for s in cfg.sides
    ]


def cmd_durations(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    series = [s for path in args.files for s in _day_series(path, cfg)]
    target = out / (args.name or "durations.csv")
    with target.open("w", encoding="utf-8", newline="\n") as fh:
        write_duration_csv(series, fh)
    print(target)
    if args.binary:
        for s in series:
            p = out / f"{s.stock_id}_{s.day:%Y%m%d}_{s.side.name}_{s.variable.value}.lobd"
            p.write_bytes(encode_duration_binary(s))
    return EXIT_CLEAN


def _read_series(paths: list[str]) -> list[DurationSeries]:
    series = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            series.extend(read_duration_csv(fh))
    return series


def cmd_dfa(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    rows = ["stock,day,side,variable,n,alpha,intercept,r_squared,stderr_alpha,n_points,status\n"]
    for s in _read_series(args.files):
        tag = f"{s.stock_id},{'' if s.day is None else s.day.isoformat()},{s.side.name},{s.variable.value}"
        try:
            fit = dfa.daily_alpha(s, cfg.dfa)
        except dfa.DFAError as exc:
            rows.append(f"{tag},{s.n},,,,,,{type(exc).__name__}\n")
            continue
        rows.append(f"{tag},{s.n},{_f(fit.alpha)},{_f(fit.intercept)},{_f(fit.r_squared)},"
                    f"{_f(fit.stderr_alpha)},{fit.n_points},ok\n")
        if args.curves:
            curve = dfa.series_curve(s.values, cfg.dfa)
            stem = out / f"curve_{s.stock_id}_{'' if s.day is None else f'{s.day:%Y%m%d}'}_{s.side.name}_{s.variable.value}"
            stem.with_suffix(".csv").write_text(curve.to_csv(), encoding="utf-8")
            stem.with_suffix(".json").write_text(dfa.to_json(curve) + "\n", encoding="utf-8")
    target = out / "daily_alpha.csv"
    target.write_text("".join(rows), encoding="utf-8")
    print(target)
    return EXIT_CLEAN


def cmd_crossover(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    groups: dict[tuple, list[DurationSeries]] = defaultdict(list)
    for s in _read_series(args.files):
        groups[s.key].append(s)
    rows = ["stock,side,variable,band,lo,hi,alpha,r_squared,ci95_half_width,n_points,status\n"]
    for key in sorted(groups, key=lambda k: (k[0], int(k[1]), list(Variable).index(k[2]))):
        days = sorted(groups[key], key=lambda s: (s.day is None, s.day))
        joined = concat_days(days)
        tag = f"{key[0]},{key[1].name},{key[2].value}"
        normalization = joined.n / len(days)
        try:
            curve = dfa.series_curve(joined.values, cfg.dfa).with_normalization(normalization)
        except dfa.DFAError as exc:
            rows.append(f"{tag},,,,,,,,{type(exc).__name__}\n")
            continue
        (out / f"curve_{key[0]}_{key[1].name}_{key[2].value}.csv").write_text(curve.to_csv(), encoding="utf-8")
        local = dfa.local_alphas(curve, cfg.bands)
        for name, (lo, hi) in cfg.bands.items():
            fit = local.fits[name]
            if fit is None:
                rows.append(f"{tag},{name},{lo:g},{hi:g},,,,,{local.errors[name].split(':')[0]}\n")
            else:
                rows.append(f"{tag},{name},{lo:g},{hi:g},{_f(fit.alpha)},{_f(fit.r_squared)},"
                            f"{_f(fit.ci95_half_width)},{fit.n_points},ok\n")
    target = out / "local_alphas.csv"
    target.write_text("".join(rows), encoding="utf-8")
    print(target)
    return EXIT_CLEAN


def cmd_econ(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    rows = []
    for path in args.files:
        stock, day, session, records = _load_day(path, cfg)
        replay, _ = replay_with_mid_path(records, cfg.deletes_are_cancels)
        table = event_table(replay.events)
        mid = MidPath.from_replay(replay.mid_path)
        for v in cfg.variables:
            for s in cfg.sides:
                series = extract_series(table, v, s, cfg.best_only[v], cfg.drop_zeros, stock, day)
                try:
                    rows.append(daily_economics(series, table, mid, session, cfg.best_only[v],
                                                cfg.rv_grid_seconds, cfg.rv_offsets))
                except EmptyDay:
                    continue
    target = out / "daily_econ.csv"
    target.write_text(econ_to_csv(rows), encoding="utf-8")
    print(target)
    return EXIT_CLEAN


def _read_table(path: str) -> list[dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        return [dict(zip(header, line.rstrip("\n").split(","))) for line in fh if line.strip()]


def cmd_correlate(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    alphas = {}
    for row in _read_table(args.alphas):
        if row.get("alpha"):
            alphas[(row["stock"], row["day"], row["side"], row["variable"])] = float(row["alpha"])
    econ_rows = _read_table(args.econ)
    groups: dict[tuple, list[dict[str, str]]] = defaultdict(list)
    for row in econ_rows:
        groups[(row["stock"], row["side"], row["variable"])].append(row)
    lines = ["stock,side,variable,econ_variable,n,r,r_critical,significant_99,status\n"]
    for (stock, side, var), rows in sorted(groups.items()):
        rows.sort(key=lambda r: r["day"])
        a = [alphas.get((stock, r["day"], side, var)) for r in rows]
        for fname in ECON_FIELDS:
            xs = [float(r[fname]) if r[fname] else None for r in rows]
            try:
                res = correlate(a, xs, ("alpha", fname))
                lines.append(f"{stock},{side},{var},{fname},{res.n},{_f(res.r)},{_f(res.r_critical)},"
                             f"{'true' if res.significant_99 else 'false'},ok\n")
            except ValueError as exc:
                lines.append(f"{stock},{side},{var},{fname},,,,,{type(exc).__name__}\n")
    target = out / "correlations.csv"
    target.write_text("".join(lines), encoding="utf-8")
    print(target)
    return EXIT_CLEAN


def cmd_run(args) -> int:
    cfg = _config(args)
    for path in args.files or []:
        cfg.inputs.append(path)
    report = run_pipeline(cfg)
    print(json.dumps({"status": report.status, "manifest": str(report.manifest),
                      "skipped_days": report.skipped_days}, indent=2))
    return report.exit_code


def cmd_synth(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    seed = cfg.seed
    if args.signal:
        spec = GeneratorSpec(args.signal, args.length, seed, args.hurst)
        target = out / f"signal_{args.signal}_{seed}.csv"
        with target.open("w", encoding="utf-8", newline="\n") as fh:
            write_signal_csv(generate(spec), fh)
        print(target)
        return EXIT_CLEAN
    spec = CorpusSpec(n_days=args.days, trades_per_day=args.trades_per_day,
                      hurst=None if args.iid else args.hurst, seed=seed, stock=args.stock)
    write_corpus(spec, out, args.format)
    print(f"wrote {spec.n_days} days to {out}")
    return EXIT_CLEAN


def cmd_validate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    checks = validate_suite(seed=seed, runs=args.runs, length=args.length, hurst=args.hurst)
    print(format_checks(checks))
    return EXIT_CLEAN if all(c.passed is not False for c in checks) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML run configuration")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="lobfractal", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def flags(p, *, replay=False, durations=False, dfa_flags=False, econ=False):
        if replay:
            p.add_argument("--deletes-are-cancels", type=_bool, default=None)
        if durations:
            p.add_argument("--drop-zeros", type=_bool, nargs="?", const=True, default=None)
        if dfa_flags:
            p.add_argument("--both-ends", type=_bool, nargs="?", const=True, default=None)
            p.add_argument("--fit-band", choices=("intra", "full"), default=None)
        if econ:
            p.add_argument("--rv-offsets", type=int, default=None)

    p = sub.add_parser("ingest", parents=[common], help="validate a log, optionally convert csv<->lob")
    p.add_argument("file")
    p.add_argument("--to", help="write the session-filtered log (.csv or .lob)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("replay", parents=[common], help="classified events of one day")
    p.add_argument("file")
    p.add_argument("--dump-book-at", type=int, default=None, help="also dump the book at this timestamp (ms)")
    flags(p, replay=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("durations", parents=[common], help="duration series of day files")
    p.add_argument("files", nargs="+")
    p.add_argument("--name", help="output CSV name (default durations.csv)")
    p.add_argument("--binary", action="store_true", help="also write one .lobd file per series")
    flags(p, replay=True, durations=True)
    p.set_defaults(func=cmd_durations)

    p = sub.add_parser("dfa", parents=[common], help="daily alpha for duration CSVs")
    p.add_argument("files", nargs="+")
    p.add_argument("--curves", action="store_true", help="write each fluctuation curve as CSV and JSON")
    flags(p, dfa_flags=True)
    p.set_defaults(func=cmd_dfa)

    p = sub.add_parser("crossover", parents=[common], help="local alphas of concatenated days")
    p.add_argument("files", nargs="+")
    flags(p, dfa_flags=True)
    p.set_defaults(func=cmd_crossover)

    p = sub.add_parser("econ", parents=[common], help="daily economic variables of day files")
    p.add_argument("files", nargs="+")
    flags(p, replay=True, durations=True, econ=True)
    p.set_defaults(func=cmd_econ)

    p = sub.add_parser("correlate", parents=[common], help="correlate daily alpha with economics")
    p.add_argument("alphas", help="daily_alpha.csv")
    p.add_argument("econ", help="daily_econ.csv")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("run", parents=[common], help="full pipeline")
    p.add_argument("files", nargs="*", help="extra input files or globs")
    flags(p, replay=True, durations=True, dfa_flags=True, econ=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus or signal")
    p.add_argument("--days", type=int, default=20)
    p.add_argument("--trades-per-day", type=int, default=3000)
    p.add_argument("--hurst", type=float, default=0.68)
    p.add_argument("--iid", action="store_true", help="i.i.d. exponential trade gaps")
    p.add_argument("--stock", default="SYN")
    p.add_argument("--format", choices=("csv", "lob"), default="csv")
    p.add_argument("--signal", choices=("white", "brownian", "fgn"), help="write a raw signal instead")
    p.add_argument("--length", type=int, default=2**16)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", parents=[common], help="estimator recovery checks")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--length", type=int, default=2**16)
    p.add_argument("--hurst", type=float, default=0.7)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, LogFormatError, BookError, ValueError, OSError) as exc:
        print(f"lobfractal: error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
