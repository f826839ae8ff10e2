"""Optical pulses: a scalar record and a columnar batch used by the session loop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optics import Polarization


@dataclass(frozen=True)
class OpticalPulse:
    """A time-stamped light pulse.

    ``intensity`` is the mean photon number (1 for an ideal single photon).
    ``segments`` describes time-structured pulses as consecutive
    ``(fraction_of_duration, polarization)`` pieces spread over ``duration``
    ns centred on ``arrival_time``.
    """

    slot: int
    emission_time: float
    arrival_time: float
    intensity: float = 1.0
    polarization: Polarization = Polarization(0.0)
    segments: tuple[tuple[float, Polarization], ...] | None = None
    duration: float = 0.0

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("pulse intensity must be non-negative")
        if self.segments is not None:
            total = sum(f for f, _ in self.segments)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"segment fractions must sum to 1, got {total}")

    def pieces(self):
        """Yield ``(t_start, t_end, photons, polarization)`` for each segment."""
        segs = self.segments or ((1.0, self.polarization),)
        t = self.arrival_time - 0.5 * self.duration
        for frac, pol in segs:
            width = frac * self.duration
            yield t, t + width, frac * self.intensity, pol
            t += width


class PulseBatch:
    """Columnar pulse table sorted by slot.

    ``offset`` is the arrival time relative to the slot's nominal arrival, in
    ns. Several rows may share a slot; slots with no row receive vacuum.
    """

    __slots__ = ("slot", "offset", "intensity", "angle")

    def __init__(self, slot, offset, intensity, angle):
        self.slot = np.asarray(slot, dtype=np.int64)
        self.offset = np.asarray(offset, dtype=float)
        self.intensity = np.asarray(intensity, dtype=float)
        self.angle = np.asarray(angle, dtype=float)
        n = len(self.slot)
        if not (len(self.offset) == len(self.intensity) == len(self.angle) == n):
            raise ValueError("pulse batch columns differ in length")

    def __len__(self):
        return len(self.slot)

    @classmethod
    def empty(cls) -> "PulseBatch":
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def from_pulses(cls, pulses, schedule) -> "PulseBatch":
        pulses = list(pulses)
        return cls(
            [p.slot for p in pulses],
            [p.arrival_time - schedule.slot_time(p.slot) for p in pulses],
            [p.intensity for p in pulses],
            [p.polarization.angle for p in pulses],
        ).sorted()

    def to_pulses(self, schedule) -> list[OpticalPulse]:
        out = []
        for s, o, i, a in zip(self.slot.tolist(), self.offset.tolist(),
                              self.intensity.tolist(), self.angle.tolist()):
            t = schedule.slot_time(s)
            out.append(OpticalPulse(s, t - schedule.origin, t + o, i, Polarization(a)))
        return out

    def sorted(self) -> "PulseBatch":
        order = np.argsort(self.slot, kind="stable")
        return self.take(order)

    def take(self, idx) -> "PulseBatch":
        return PulseBatch(self.slot[idx], self.offset[idx], self.intensity[idx], self.angle[idx])

    def slot_range(self, lo: int, hi: int) -> "PulseBatch":
        a, b = np.searchsorted(self.slot, [lo, hi])
        return self.take(slice(a, b))

    @staticmethod
    def concat(batches) -> "PulseBatch":
        batches = list(batches)
        if not batches:
            return PulseBatch.empty()
        return PulseBatch(*(np.concatenate([getattr(b, c) for b in batches])
                            for c in PulseBatch.__slots__)).sorted()
