"""Gated single-photon detector pair.

Each detector has a windowed efficiency curve (raised-cosine edges around a
flat plateau), dead time, per-gate dark counts, a hard bright-pulse click
threshold, one-shot afterpulsing and Gaussian timestamp jitter. The per-slot
simulation itself lives in :mod:`qkdlab._kernels`; this module holds the
parameter types and the scalar entry points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ParamError
from .optics import Basis

N_PARAMS = 11


class ClickKind(IntEnum):
    NONE = 0
    D0 = 1
    D1 = 2
    BOTH = 3


@dataclass(frozen=True)
class EfficiencyCurve:
    center: float = 0.0
    rise: float = 0.5
    plateau: float = 1.0
    fall: float = 0.5
    peak: float = 0.10

    def __post_init__(self):
        for name in ("rise", "fall"):
            if not getattr(self, name) > 0:
                raise ParamError(name, "must be > 0")
        if not self.plateau >= 0:
            raise ParamError("plateau", "must be >= 0")
        if not (0 < self.peak <= 1):
            raise ParamError("peak", "must be in (0, 1]")
        if not math.isfinite(self.center):
            raise ParamError("center", "must be finite")

    @property
    def start(self) -> float:
        return self.center - 0.5 * self.plateau - self.rise

    @property
    def end(self) -> float:
        return self.center + 0.5 * self.plateau + self.fall

    @property
    def width(self) -> float:
        return self.rise + self.plateau + self.fall


def efficiency_at(curve: EfficiencyCurve, t: float) -> float:
    """Detection efficiency at local gate time ``t`` (ns)."""
    return _efficiency(curve.center, curve.rise, curve.plateau, curve.fall, curve.peak, t)


def _efficiency(center, rise, plateau, fall, peak, t):
    # Kept operation-for-operation identical to the kernels.
    p0 = center - 0.5 * plateau
    p1 = center + 0.5 * plateau
    start = p0 - rise
    end = p1 + fall
    if t <= start or t >= end:
        return 0.0
    if t < p0:
        x = (t - start) / rise
        return peak * (1.0 - math.cos(math.pi * x)) * 0.5
    if t <= p1:
        return peak
    x = (t - p1) / fall
    return peak * (1.0 + math.cos(math.pi * x)) * 0.5


def efficiency_array(curve: EfficiencyCurve, t) -> np.ndarray:
    """Vectorized :func:`efficiency_at`; plateau values are exactly ``peak``."""
    t = np.asarray(t, dtype=float)
    p0 = curve.center - 0.5 * curve.plateau
    p1 = curve.center + 0.5 * curve.plateau
    start = p0 - curve.rise
    end = p1 + curve.fall
    rise = curve.peak * (1.0 - np.cos(np.pi * (t - start) / curve.rise)) * 0.5
    fall = curve.peak * (1.0 + np.cos(np.pi * (t - p1) / curve.fall)) * 0.5
    out = np.where(t < p0, rise, np.where(t <= p1, curve.peak, fall))
    return np.where((t <= start) | (t >= end), 0.0, out)


@dataclass(frozen=True)
class DetectorParams:
    curve: EfficiencyCurve = field(default_factory=EfficiencyCurve)
    dead_time: float = 1000.0
    dark_count_prob: float = 1e-6
    bright_threshold: float = 1e5
    afterpulse_prob: float = 0.0
    jitter_sigma: float = 0.0
    centroid_offset: float = 0.0

    def __post_init__(self):
        if not self.dead_time >= 0:
            raise ParamError("dead_time", "must be >= 0")
        if not (0 <= self.dark_count_prob <= 1):
            raise ParamError("dark_count_prob", "must be in [0, 1]")
        if not self.bright_threshold > 1:
            raise ParamError("bright_threshold", "must be > 1 photon")
        if not (0 <= self.afterpulse_prob <= 1):
            raise ParamError("afterpulse_prob", "must be in [0, 1]")
        if not self.jitter_sigma >= 0:
            raise ParamError("jitter_sigma", "must be >= 0")
        if not math.isfinite(self.centroid_offset):
            raise ParamError("centroid_offset", "must be finite")

    def as_row(self) -> list[float]:
        c = self.curve
        return [c.center, c.rise, c.plateau, c.fall, c.peak, self.dead_time,
                self.dark_count_prob, self.bright_threshold, self.afterpulse_prob,
                self.jitter_sigma, self.centroid_offset]


@dataclass(frozen=True)
class GateSchedule:
    """Slot period and per-detector gate offsets relative to nominal arrival.

    ``origin`` is the nominal arrival time of slot 0, i.e. the channel delay.
    """

    period: float = 2000.0
    gate_offset_d0: float = 0.0
    gate_offset_d1: float = 0.0
    origin: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ParamError("period", "must be > 0")
        for name in ("gate_offset_d0", "gate_offset_d1", "origin"):
            if not math.isfinite(getattr(self, name)):
                raise ParamError(name, "must be finite")

    @property
    def offsets(self) -> tuple[float, float]:
        return (self.gate_offset_d0, self.gate_offset_d1)

    @property
    def mismatch(self) -> float:
        return self.gate_offset_d1 - self.gate_offset_d0

    def slot_time(self, slot: int) -> float:
        return slot * self.period + self.origin


@dataclass(frozen=True)
class ClickOutcome:
    kind: ClickKind
    timestamp: float | None = None

    @property
    def bit(self) -> int | None:
        if self.kind is ClickKind.D0:
            return 0
        if self.kind is ClickKind.D1:
            return 1
        return None


@dataclass
class DetectorState:
    dead_until_d0: float = -math.inf
    dead_until_d1: float = -math.inf
    afterpulse_armed_d0: bool = False
    afterpulse_armed_d1: bool = False

    def arrays(self):
        return (np.array([self.dead_until_d0, self.dead_until_d1], dtype=float),
                np.array([self.afterpulse_armed_d0, self.afterpulse_armed_d1], dtype=np.uint8))

    def update(self, dead_until, armed) -> None:
        self.dead_until_d0, self.dead_until_d1 = float(dead_until[0]), float(dead_until[1])
        self.afterpulse_armed_d0, self.afterpulse_armed_d1 = bool(armed[0]), bool(armed[1])


def param_matrix(pair) -> np.ndarray:
    return np.array([pair[0].as_row(), pair[1].as_row()], dtype=float)


def detect_bright(params: DetectorParams, power: float) -> tuple[bool, bool]:
    """Response to a bright pulse outside single-photon operation.

    Returns ``(click, arms_afterpulse)``. The click is deterministic and
    independent of gate or dead time.
    """
    if power < 0:
        raise ValueError("optical power must be non-negative")
    if power >= params.bright_threshold:
        return True, False
    return False, power > 0


def stamp_timestamp(params: DetectorParams, true_time, rng: np.random.Generator):
    """Add the detector's centroid offset and Gaussian jitter to click times."""
    t = np.asarray(true_time, dtype=float)
    noise = rng.standard_normal(t.shape) if params.jitter_sigma > 0 else 0.0
    out = t + params.centroid_offset + params.jitter_sigma * noise
    return float(out) if out.ndim == 0 else out


def detect_pulse(state: DetectorState, params_pair, schedule: GateSchedule, pulse,
                 basis: Basis, rng: np.random.Generator, slot: int = 0) -> ClickOutcome:
    """Run one gate of the detector pair against a single optical pulse.

    ``pulse`` is an :class:`~qkdlab.pulses.OpticalPulse`; ``None`` means
    vacuum, in which case the gate index is taken from ``slot``. ``state``
    is updated in place.
    """
    if pulse is None:
        kinds, stamps = _run_one(state, params_pair, schedule, slot, int(basis), [], rng)
        kind = ClickKind(int(kinds[0]))
        return ClickOutcome(kind, None if kind is ClickKind.NONE else float(stamps[0]))
    if pulse.intensity < 0:
        raise ValueError("pulse intensity must be non-negative")
    slot = pulse.slot
    rel = pulse.arrival_time - schedule.slot_time(slot)
    kinds, stamps = _run_one(state, params_pair, schedule, slot, int(basis),
                             [(rel, pulse.intensity, pulse.polarization.angle)], rng)
    kind = ClickKind(int(kinds[0]))
    return ClickOutcome(kind, None if kind is ClickKind.NONE else float(stamps[0]))


def _run_one(state, params_pair, schedule, slot, basis, pulses, rng):
    from ._kernels import simulate_slots

    dead, armed = state.arrays()
    m = len(pulses)
    u_slot = rng.random((1, 2, 4))
    z = rng.standard_normal((1, 2))
    u_pulse = rng.random((m, 2))
    arr = np.array(pulses, dtype=float).reshape(m, 3)
    kinds, stamps = simulate_slots(
        slot, np.array([basis], dtype=np.int8), schedule.period, schedule.origin,
        np.full(m, slot, dtype=np.int64), arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(),
        param_matrix(params_pair), np.array(schedule.offsets, dtype=float),
        u_pulse, u_slot, z, dead, armed)
    state.update(dead, armed)
    return kinds, stamps
