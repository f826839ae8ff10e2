import math
from dataclasses import replace

import numpy as np
import pytest

import oracles
from qkdlab.attacks import CalibrationSpoof, FakedStatesDEM, AttackContext
from qkdlab.calibration import apply_calibration, run_calibration, scan_grid
from qkdlab.config import CalibrationConfig, load_config
from qkdlab.detector import DetectorParams, GateSchedule
from qkdlab.errors import AttackUnavailable, CalibrationError
from qkdlab.harness import run_trial

CFG = CalibrationConfig()
DETS = (DetectorParams(), DetectorParams())
GRID = scan_grid(CFG)


def test_grid_defaults():
    assert GRID[0] == -2.0 and GRID[-1] == 2.0 and len(GRID) == 81
    assert -0.5 in GRID and 0.4 in GRID


def test_unspoofed_offsets_agree_with_oracle():
    res = run_calibration(CFG, DETS)
    o0, o1, _ = oracles.calibration_argmax([(1.0, 0.0)], CFG.pulse_duration, GRID, {})
    assert (res.offset_d0, res.offset_d1) == (o0, o1)
    assert abs(res.offset_d0 - res.offset_d1) <= CFG.scan_step
    assert res.scan_profile.shape == (len(GRID), 2)


def test_unspoofed_profile_matches_quadrature():
    res = run_calibration(CFG, DETS)
    _, _, expected = oracles.calibration_argmax([(1.0, 0.0)], CFG.pulse_duration, GRID, {})
    ref = CFG.pulse_intensity * expected
    # midpoint nodes in the package vs adaptive quadrature here
    assert np.max(np.abs(res.expected_clicks - ref)) <= 1e-4 * ref.max()


@pytest.mark.parametrize("delta", [0.0, 0.1, 0.25, 0.33, 0.4, 0.6, 0.75, 1.0])
def test_spoof_mismatch_tracks_delta(delta):
    res = run_calibration(CFG, DETS, CalibrationSpoof(delta=delta))
    o0, o1, _ = oracles.calibration_argmax([(0.5, 45.0), (0.5, 135.0)], 2 * delta, GRID, {})
    assert (res.offset_d0, res.offset_d1) == pytest.approx((o0, o1), abs=1e-9)
    assert abs(res.mismatch - delta) <= CFG.scan_step + 1e-9


def test_spoof_keeps_click_counts():
    honest = run_calibration(CFG, DETS)
    spoofed = run_calibration(CFG, DETS, CalibrationSpoof(delta=0.4))
    for j in (0, 1):
        assert spoofed.scan_profile[:, j].max() >= 0.9 * honest.scan_profile[:, j].max()


def test_sampled_counts_within_binomial_bounds():
    cfg = replace(CFG, counting="sampled")
    res = run_calibration(cfg, DETS, rng=np.random.default_rng(4))
    n = cfg.num_pulses_per_step * cfg.pulse_intensity
    for j, off in ((0, res.offset_d0), (1, res.offset_d1)):
        i = int(np.flatnonzero(GRID == off)[0])
        p = res.expected_clicks[i, j] / cfg.pulse_intensity
        assert abs(res.scan_profile[i, j] - n * p) <= 4 * math.sqrt(n * p * (1 - p)) + 1
        assert abs(off - 0.0) <= 2 * cfg.scan_step


def test_repeat_is_identical():
    a = run_calibration(CFG, DETS)
    b = run_calibration(CFG, DETS)
    assert (a.offset_d0, a.offset_d1) == (b.offset_d0, b.offset_d1)
    s = replace(CFG, counting="sampled")
    c = run_calibration(s, DETS, rng=np.random.default_rng(1))
    d = run_calibration(s, DETS, rng=np.random.default_rng(1))
    assert np.array_equal(c.scan_profile, d.scan_profile)


def test_zero_intensity_fails():
    with pytest.raises(CalibrationError):
        run_calibration(replace(CFG, pulse_intensity=0.0), DETS)


def test_apply_calibration():
    sched = GateSchedule(origin=10.0)
    honest = run_calibration(CFG, DETS)
    assert apply_calibration(honest, sched) == sched
    spoofed = run_calibration(CFG, DETS, CalibrationSpoof(delta=0.4))
    new = apply_calibration(spoofed, sched)
    assert new.offsets == (spoofed.offset_d0, spoofed.offset_d1)
    assert new.origin == sched.origin and new.period == sched.period


def test_honest_calibration_blocks_faked_states():
    sched = apply_calibration(run_calibration(CFG, DETS), GateSchedule())
    with pytest.raises(AttackUnavailable):
        FakedStatesDEM().prepare(AttackContext(DETS, sched))


def test_spoofed_calibration_enables_attack():
    res = run_trial(load_config("calibration_spoof"), 0)
    cal = res.info["calibration"]
    assert abs(cal["mismatch"] - 0.4) <= 0.05 + 1e-9
    assert res.stats.qber < 0.11 and not res.stats.abort
    assert res.stats.eve_known_fraction > 0.9


@pytest.mark.parametrize("kw", [{"scan_step": 0}, {"scan_min": 1.0}, {"counting": "guess"},
                                {"pulse_intensity": -1}])
def test_config_validation(kw):
    with pytest.raises(Exception):
        CalibrationConfig(**kw)
