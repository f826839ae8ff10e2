"""Scenario orchestration: trials, sweeps, aggregation, reports and files.

Trial ``i`` of a scenario with master seed ``s`` draws every random stream
from ``qkdlab.rng.derive_seed(s, i, label)``; results therefore do not depend
on how trials are spread over worker processes.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, mbp
from .calibration import apply_calibration, run_calibration
from .config import SessionConfig, config_hash, with_override
from .errors import ConfigError
from .optics import Basis
from .protocol import run_session
from .rng import Streams
from .sidechannel import (TimestampLog, build_histograms, eve_guess_accuracy,
                          info_from_accuracy, truncated_accuracy)

SEED_RULE = "blake2b-64('{seed}:{trial}:{stream}') -> PCG64"
DECIMALS = 9
OUTCOME_NAMES = {0: "none", 1: "D0", 2: "D1", 3: "both"}


# --- formatting --------------------------------------------------------------

def clean(obj):
    """Round floats to fixed decimals and turn NaN/inf into null."""
    if isinstance(obj, dict):
        return {k: clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return round(x, DECIMALS) if math.isfinite(x) else None
    return obj


def dumps(report: dict) -> str:
    return json.dumps(clean(report), indent=2) + "\n"


def fmt(x: float, decimals: int = 6) -> str:
    return "" if x is None or not math.isfinite(x) else f"{x:.{decimals}f}"


# --- sessions --------------------------------------------------------------

def run_trial(config: SessionConfig, trial: int, kernel=None):
    """One session, preceded by calibration when the scenario asks for it."""
    strategy = config.strategy.build()
    schedule = None
    calib = None
    if config.calibration is not None and config.calibration.run_before_session:
        calib = run_calibration(config.calibration, config.detectors, strategy,
                                Streams(config.seed, trial)["calibration"])
        schedule = apply_calibration(calib, config.gate_schedule())
    result = run_session(config, strategy, trial=trial, schedule=schedule, kernel=kernel)
    if calib is not None:
        result.info["calibration"] = calib.as_dict()
    return result


def timing_info(result, resolution: float, bin_width: float = 0.05) -> float:
    """Mean over bases of per-bit timing leakage at ``resolution``.

    The Gaussian model is fitted on Bob's full-precision timestamps; the
    leakage of the revealed values is the ML accuracy on the rounded model.
    """
    log = TimestampLog.from_bob(result.bob, revealed=False)
    hists = build_histograms(log, bin_width)
    vals = []
    for b in (Basis.Z, Basis.X):
        try:
            g = eve_guess_accuracy(hists, b)
        except ValueError:
            continue
        mu0 = hists[(int(b), 0)].centroid
        vals.append(info_from_accuracy(truncated_accuracy(mu0, mu0 + g.separation, g.sigma, resolution)))
    return float(np.mean(vals)) if vals else math.nan


def _session_summary(config, trial, kernel=None) -> dict:
    res = run_trial(config, trial, kernel)
    out = {"trial": trial, **res.stats.as_dict(), **{k: v for k, v in res.info.items()}}
    out["timing_info_bits"] = timing_info(res, config.timestamp_resolution, config.analysis.bin_width)
    return out


def _map(func, args, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, *zip(*args)))
    return [func(*a) for a in args]


def binomial_interval(successes: float, n: int, k: float = 4.0):
    if n <= 0:
        return math.nan, [math.nan, math.nan]
    p = successes / n
    half = k * math.sqrt(p * (1 - p) / n)
    return p, [max(0.0, p - half), min(1.0, p + half)]


def aggregate(sessions: list[dict]) -> dict:
    sampled = sum(s["sampled_bits"] for s in sessions)
    errors = sum(s["sample_errors"] for s in sessions)
    final = sum(s["final_key_bits"] for s in sessions)
    eve_correct = sum(round(s["eve_known_fraction"] * s["final_key_bits"])
                      for s in sessions if s["final_key_bits"])
    sent = sum(s["pulses_sent"] for s in sessions)
    detected = sum(s["pulses_detected"] for s in sessions)
    qber, qci = binomial_interval(errors, sampled)
    eve, eci = binomial_interval(eve_correct, final)
    rate, rci = binomial_interval(detected, sent)

    def mean(key):
        vals = [s[key] for s in sessions if s[key] is not None and math.isfinite(s[key])]
        return float(np.mean(vals)) if vals else math.nan

    return {
        "trials": len(sessions),
        "mean_qber": mean("qber"),
        "pooled_qber": qber,
        "qber_interval_4sigma": qci,
        "mean_eve_known_fraction": mean("eve_known_fraction"),
        "pooled_eve_known_fraction": eve,
        "eve_known_interval_4sigma": eci,
        "mean_detection_rate": mean("detection_rate"),
        "pooled_detection_rate": rate,
        "detection_rate_interval_4sigma": rci,
        "mean_sift_fraction": mean("sift_fraction"),
        "mean_timing_info_bits": mean("timing_info_bits"),
        "aborted_trials": sum(1 for s in sessions if s["abort"]),
    }


def provenance(config: SessionConfig, **extra) -> dict:
    return {"config_hash": config_hash(config), "seed": config.seed, "version": __version__,
            "seed_rule": SEED_RULE, **extra}


def run_scenario(config: SessionConfig, trials: int = 1, workers: int = 1, kernel=None) -> dict:
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    # fail on strategy/receiver mismatches before any trial runs
    if config.strategy.kind != "none" and not (config.calibration and config.calibration.run_before_session):
        from .attacks import AttackContext
        config.strategy.build().prepare(AttackContext(config.detectors, config.gate_schedule()))
    args = [(config, t, kernel) for t in range(trials)]
    sessions = sorted(_map(_session_summary, args, workers), key=lambda s: s["trial"])
    return {"scenario": config.name, "provenance": provenance(config, trials=trials),
            "sessions": sessions, "aggregate": aggregate(sessions)}


def run_sweep(config: SessionConfig, param: str, values, sessions: int = 1, workers: int = 1,
              kernel=None) -> dict:
    """Aggregate per sweep value. All values reuse trial indices 0..sessions-1."""
    values = list(values)
    if not values:
        raise ConfigError("values", "sweep needs at least one value")
    if sessions < 1:
        raise ConfigError("sessions", "must be >= 1")
    configs = [with_override(config, param, v) for v in values]
    args = [(c, t, kernel) for c in configs for t in range(sessions)]
    flat = _map(_session_summary, args, workers)
    points = []
    for i, v in enumerate(values):
        chunk = flat[i * sessions:(i + 1) * sessions]
        points.append({"value": v, "aggregate": aggregate(chunk), "sessions": chunk})
    return {"scenario": config.name, "param": param,
            "provenance": provenance(config, sessions_per_value=sessions),
            "points": points}


def sweep_rows(report: dict):
    for p in report["points"]:
        a = p["aggregate"]
        yield (p["value"], a["mean_qber"], a["mean_eve_known_fraction"], a["mean_detection_rate"],
               a["mean_timing_info_bits"])


# --- files -----------------------------------------------------------------

EVENT_COLUMNS = ("slot", "alice_bit", "alice_basis", "bob_basis", "outcome", "timestamp")
HIST_COLUMNS = ("basis", "detector", "bin_lo", "bin_hi", "count")
SWEEP_COLUMNS = ("value", "mean_qber", "mean_eve_info", "detection_rate", "timing_info_bits")
EVE_COLUMNS = ("slot", "measured_basis", "guessed_bit", "action")


def write_events(path, result, detected_only: bool = False):
    a, b = result.alice, result.bob
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for s, ab, aba, bba, o, t in zip(a.slot.tolist(), a.bit.tolist(), a.basis.tolist(),
                                        b.basis.tolist(), b.outcome.tolist(),
                                        b.revealed_timestamp.tolist()):
            if detected_only and o == 0:
                continue
            w.writerow((s, ab, Basis(aba).name, Basis(bba).name, OUTCOME_NAMES[o], fmt(t)))


def read_events(path) -> TimestampLog:
    slots, ts, bases, dets = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(EVENT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"event log lacks columns {sorted(missing)}")
        for row in reader:
            if row["outcome"] not in ("D0", "D1"):
                continue
            slots.append(int(row["slot"]))
            ts.append(float(row["timestamp"]))
            bases.append(Basis[row["bob_basis"]])
            dets.append(1 if row["outcome"] == "D1" else 0)
    return TimestampLog(np.array(slots, dtype=np.int64), np.array(ts, dtype=float),
                        np.array(bases, dtype=np.int8), np.array(dets, dtype=np.int8))


def write_eve_log(path, log):
    basis_name = {-1: "", 0: "Z", 1: "X"}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVE_COLUMNS)
        for s, b, g, act in log.rows():
            w.writerow((s, basis_name[b], "" if g < 0 else g, act))


def write_histograms(path, hists):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HIST_COLUMNS)
        for (b, d), h in sorted(hists.items()):
            for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
                w.writerow((Basis(b).name, f"D{d}", fmt(lo), fmt(hi), int(c)))


def write_sweep(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for row in sweep_rows(report):
            w.writerow((fmt(float(row[0])),) + tuple(fmt(x, DECIMALS) for x in row[1:]))


def write_scan_profile(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("offset", "clicks_d0", "clicks_d1"))
        for s, (c0, c1) in zip(result.scan_offsets, result.scan_profile):
            w.writerow((fmt(s), fmt(c0, 3), fmt(c1, 3)))


def write_json(path, report):
    Path(path).write_text(dumps(report))


# --- worked tables -----------------------------------------------------------

_YN = {1: "Yes", 0: "No"}
PUBLISHED = {
    "table2_answers": ["Yes", "No", "Yes", "No", "Yes", "No", "No", "No", "Yes", "No", "Yes", "No"],
    "table2_kept": [1, 3, 4, 5, 6, 8, 11, 12],
    "table2_key": [1, 1, 0, 1, 0, 0, 1, 0],
    "table3_alice_bits": [1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 1, 0],
    "table3_eve_answers": ["Yes", "No", "Yes", "Yes", "Yes", "No", "No", "Yes", "Yes", "No", "Yes", "Yes"],
    "table3_eve_values": [3, 3, 1, 2, 3, 4, 4, 1, 1, 2, 2, 3],
    "table3_bob_answers": ["Yes", "Yes", "Yes", "No", "No", "No", "No", "Yes", "Yes", "Yes", "No", "No"],
    "table3_bob_bits": [1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 0, 0],
    "table3_error_slots": [5, 8, 11],
    "table3_qber": 3 / 8,
}


def reproduce_tables() -> tuple[str, bool]:
    """Recompute the three worked tables and compare with the published cells."""
    lines, mismatches = [], []

    def check(label, got, want):
        if got != want:
            if isinstance(want, list) and isinstance(got, list) and len(got) == len(want):
                for i, (g, w) in enumerate(zip(got, want), start=1):
                    if g != w:
                        mismatches.append(f"{label}[{i}]: got {g}, published {w}")
            else:
                mismatches.append(f"{label}: got {got}, published {want}")

    def row(name, cells):
        lines.append(f"{name:<18}" + " ".join(f"{str(c):>4}" for c in cells))

    # Table 1: every encoded value satisfies its keyword
    lines.append("Table 1: encoding of the balls")
    row("slot", range(1, 13))
    row("keyword", mbp.TABLE1_KEYWORDS)
    row("value n", mbp.TABLE1_VALUES)
    for i, (k, n) in enumerate(zip(mbp.TABLE1_KEYWORDS, mbp.TABLE1_VALUES), start=1):
        try:
            mbp.check_encoding(k, n)
        except mbp.ScriptError as exc:
            mismatches.append(f"table1[{i}]: {exc}")
    lines.append("")

    t2 = mbp.run_script(mbp.table2_script())
    kept, _, key = mbp.sifted(t2)
    lines.append("Table 2: protocol without Eve")
    row("Bob's question", mbp.BOB_QUESTIONS)
    row("ball's answer", [_YN[r.bob_answer] for r in t2])
    row("bits (Bob)", [f"{r.bob_answer}{'*' if r.kept else ''}" for r in t2])
    lines.append(f"kept slots {kept}, key {''.join(map(str, key))}")
    check("table2_answers", [_YN[r.bob_answer] for r in t2], PUBLISHED["table2_answers"])
    check("table2_kept", kept, PUBLISHED["table2_kept"])
    check("table2_key", key, PUBLISHED["table2_key"])
    lines.append("")

    t3 = mbp.run_script(mbp.table3_script())
    kept3, _, _ = mbp.sifted(t3)
    errors = [r.slot for r in t3 if r.error]
    q = mbp.qber(t3)
    lines.append("Table 3: intercept-resend on the balls")
    row("bits (Alice)", [r.alice_bit for r in t3])
    row("Eve's question", mbp.EVE_QUESTIONS)
    row("ball's answer", [_YN[r.eve_answer] for r in t3])
    row("value m", [r.delivered_value for r in t3])
    row("Bob's question", mbp.BOB_QUESTIONS)
    row("ball's answer", [_YN[r.bob_answer] for r in t3])
    row("bits (Bob)", [f"{r.bob_answer}{'!' if r.error else '*' if r.kept else ''}" for r in t3])
    lines.append(f"kept slots {kept3}, error slots {errors}, QBER {q:.3f} ({len(errors)}/{len(kept3)})")
    check("table3_alice_bits", [r.alice_bit for r in t3], PUBLISHED["table3_alice_bits"])
    check("table3_eve_answers", [_YN[r.eve_answer] for r in t3], PUBLISHED["table3_eve_answers"])
    check("table3_eve_values", [r.delivered_value for r in t3], PUBLISHED["table3_eve_values"])
    check("table3_bob_answers", [_YN[r.bob_answer] for r in t3], PUBLISHED["table3_bob_answers"])
    check("table3_bob_bits", [r.bob_answer for r in t3], PUBLISHED["table3_bob_bits"])
    check("table3_kept", kept3, PUBLISHED["table2_kept"])
    check("table3_error_slots", errors, PUBLISHED["table3_error_slots"])
    check("table3_qber", q, PUBLISHED["table3_qber"])
    lines.append("")
    lines.append("(* kept after sifting, ! kept and in error)")
    if mismatches:
        lines.append("MISMATCHES:")
        lines.extend("  " + m for m in mismatches)
    else:
        lines.append("all cells match")
    return "\n".join(lines) + "\n", not mismatches
