"""Command-line interface: ``qkdlab <command> ...``.

Exit codes: 0 success, 1 table mismatch, 2 usage or configuration error,
3 at least one trial aborted on its QBER estimate.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .attacks import CalibrationSpoof
from .calibration import run_calibration
from .config import CalibrationConfig, load_config, shipped_scenarios
from .errors import AttackUnavailable, ConfigError, ParamError
from .rng import Streams
from .sidechannel import TimestampLog, analyze, build_histograms, truncate_timestamps

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3


def _values(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    return vals


def _load(args):
    cfg = load_config(args.scenario)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "pulses", None) is not None:
        changes["num_pulses"] = args.pulses
    return replace(cfg, **changes) if changes else cfg


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = _load(args)
    report = harness.run_scenario(cfg, trials=args.trials, workers=args.workers)
    out = _outdir(args.out)
    harness.write_json(out / "summary.json", report)
    first = harness.run_trial(cfg, 0)
    harness.write_events(out / "events.csv", first)
    harness.write_eve_log(out / "eve_log.csv", first.eve_log)
    harness.write_histograms(out / "histograms.csv",
                             build_histograms(TimestampLog.from_bob(first.bob), cfg.analysis.bin_width))
    if "calibration" in first.info:
        harness.write_json(out / "calibration.json", first.info["calibration"])
    a = report["aggregate"]
    print(f"{cfg.name}: {a['trials']} trial(s), mean QBER {harness.fmt(a['mean_qber'])}, "
          f"eve known {harness.fmt(a['mean_eve_known_fraction'])}, "
          f"detection rate {harness.fmt(a['mean_detection_rate'])}, aborted {a['aborted_trials']}")
    print(f"wrote {out}/summary.json, events.csv, eve_log.csv, histograms.csv")
    return EXIT_ABORT if a["aborted_trials"] else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    report = harness.run_sweep(cfg, args.param, args.values, sessions=args.sessions, workers=args.workers)
    out = _outdir(args.out)
    harness.write_sweep(out / "sweep.csv", report)
    harness.write_json(out / "summary.json", report)
    print(",".join(harness.SWEEP_COLUMNS))
    for row in harness.sweep_rows(report):
        print(",".join(harness.fmt(float(x)) for x in row))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    calib_cfg = cfg.calibration or CalibrationConfig()
    strategy = None
    if args.spoof is not None:
        strategy = CalibrationSpoof(delta=args.spoof)
    elif cfg.calibration is not None and cfg.calibration.run_before_session:
        strategy = cfg.strategy.build()
    result = run_calibration(calib_cfg, cfg.detectors, strategy, Streams(cfg.seed, 0)["calibration"])
    out = _outdir(args.out)
    harness.write_json(out / "calibration.json", result.as_dict())
    harness.write_scan_profile(out / "scan_profile.csv", result)
    print(f"offsets d0={result.offset_d0:.6f} d1={result.offset_d1:.6f} "
          f"mismatch={result.mismatch:.6f} ns")
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        log = harness.read_events(args.event_log)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read event log: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = analyze(log, bin_width=args.bin_width, truncate=args.truncate)
    out = _outdir(args.out)
    hist_log = truncate_timestamps(log, args.truncate) if args.truncate else log
    harness.write_histograms(out / "histograms.csv", build_histograms(hist_log, args.bin_width))
    harness.write_json(out / "timing_report.json", report)
    print(harness.dumps(report), end="")
    return EXIT_OK


def cmd_tables(args) -> int:
    text, ok = harness.reproduce_tables()
    print(text, end="")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_list(args) -> int:
    for name in shipped_scenarios():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdlab", description="Seeded BB84 detector-attack laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario", help="shipped scenario name or path to a YAML file")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--pulses", type=int, help="override num_pulses")
        sp.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")

    r = sub.add_parser("run", help="run a scenario for one or more trials")
    scenario_args(r)
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one numeric config field")
    scenario_args(s)
    s.add_argument("--param", required=True, help="dotted path, e.g. schedule.gate_offset_d1")
    s.add_argument("--values", required=True, type=_values, help="comma-separated numbers")
    s.add_argument("--sessions", type=int, default=1, help="sessions per value")
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("calibrate", help="run Bob's gate calibration scan")
    scenario_args(c)
    c.add_argument("--spoof", type=float, default=None, help="Eve's spoof delta in ns")
    c.add_argument("--out", default="out")
    c.set_defaults(func=cmd_calibrate)

    a = sub.add_parser("analyze-timing", help="timing side-channel analysis of an events.csv")
    a.add_argument("event_log")
    a.add_argument("--truncate", type=float, default=None, help="timestamp resolution in ns")
    a.add_argument("--bin-width", type=float, default=0.05)
    a.add_argument("--out", default="out")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("reproduce-tables", help="recompute the magical-ball tables")
    t.set_defaults(func=cmd_tables)

    ls = sub.add_parser("list-scenarios", help="print shipped scenario names")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParamError, AttackUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
