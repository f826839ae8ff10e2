"""Bob's gate-synchronization routine and its interception point.

Alice sends bright H pulses, Bob measures in X and scans each detector's
gate offset independently, keeping the offset with the most clicks. Photons
are treated as independent; saturation and dead time are ignored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import CalibrationConfig
from .detector import GateSchedule, efficiency_array
from .errors import CalibrationError
from .optics import H, Basis, Polarization, detection_probabilities
from .pulses import OpticalPulse

NODES = 1000


@dataclass
class CalibrationResult:
    offset_d0: float
    offset_d1: float
    scan_offsets: np.ndarray
    scan_profile: np.ndarray  # (steps, 2) click counts
    expected_clicks: np.ndarray  # (steps, 2) expected clicks per pulse
    pulse_intensity: float
    num_pulses_per_step: int

    @property
    def mismatch(self) -> float:
        return self.offset_d1 - self.offset_d0

    def as_dict(self) -> dict:
        return {
            "offset_d0": self.offset_d0,
            "offset_d1": self.offset_d1,
            "mismatch": self.mismatch,
            "steps": len(self.scan_offsets),
            "pulse_intensity": self.pulse_intensity,
            "num_pulses_per_step": self.num_pulses_per_step,
        }


def scan_grid(cfg: CalibrationConfig) -> np.ndarray:
    n = int(math.floor((cfg.scan_max - cfg.scan_min) / cfg.scan_step + 1e-9)) + 1
    # rounding keeps grid points such as -0.5 exact
    return np.round(cfg.scan_min + cfg.scan_step * np.arange(n), 9)


def calibration_pulse(cfg: CalibrationConfig) -> OpticalPulse:
    return OpticalPulse(0, 0.0, 0.0, cfg.pulse_intensity, Polarization(H), duration=cfg.pulse_duration)


def expected_profile(pulse: OpticalPulse, detectors, offsets: np.ndarray) -> np.ndarray:
    """Expected clicks per pulse for each scan offset and detector, X basis."""
    out = np.zeros((len(offsets), 2))
    for t0, t1, photons, pol in pulse.pieces():
        if photons <= 0:
            continue
        route = detection_probabilities(pol, Basis.X)
        if t1 > t0:
            h = (t1 - t0) / NODES
            nodes = t0 + h * (np.arange(NODES) + 0.5)
        else:
            nodes = np.array([t0])
        for j in (0, 1):
            if route[j] == 0.0:
                continue
            eta = efficiency_array(detectors[j].curve, nodes[None, :] - offsets[:, None])
            out[:, j] += photons * route[j] * eta.mean(axis=1)
    return out


def run_calibration(cfg: CalibrationConfig, detectors, strategy=None,
                    rng: np.random.Generator | None = None) -> CalibrationResult:
    pulse = calibration_pulse(cfg)
    if strategy is not None:
        pulse = strategy.spoof_calibration(pulse)
    offsets = scan_grid(cfg)
    expected = expected_profile(pulse, detectors, offsets)
    if cfg.counting == "expected":
        counts = cfg.num_pulses_per_step * expected
    else:
        if rng is None:
            raise ValueError("sampled counting needs an rng")
        counts = np.zeros_like(expected)
        for i in range(len(offsets)):
            for j in (0, 1):
                n_photons = int(round(cfg.num_pulses_per_step * pulse.intensity))
                p = min(1.0, expected[i, j] / pulse.intensity) if pulse.intensity > 0 else 0.0
                counts[i, j] = rng.binomial(n_photons, p)
    if not np.any(counts > 0):
        raise CalibrationError("calibration scan recorded no clicks")
    best = np.argmax(counts, axis=0)  # first maximum: earliest offset
    return CalibrationResult(float(offsets[best[0]]), float(offsets[best[1]]), offsets, counts,
                             expected, pulse.intensity, cfg.num_pulses_per_step)


def apply_calibration(result: CalibrationResult, schedule: GateSchedule) -> GateSchedule:
    return replace(schedule, gate_offset_d0=result.offset_d0, gate_offset_d1=result.offset_d1)
