"""Eavesdropping strategies.

Every strategy maps the batch of pulses leaving the channel to the batch that
reaches Bob and returns an :class:`EveLog` with one entry per touched slot.
Eve's own measurements use ideal apparatus: unit efficiency, no dark counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import ClassVar

import numpy as np

from .detector import DetectorParams, GateSchedule, efficiency_array
from .errors import AttackUnavailable, ParamError
from .optics import A, D, Polarization
from .pulses import OpticalPulse, PulseBatch

ACTIONS = ("pass", "resend", "resend_faked", "shift_early", "shift_late",
           "bright_after_gate", "calibration_spoof")
_ACTION = {name: i for i, name in enumerate(ACTIONS)}


@dataclass
class EveLog:
    """Per-slot record of what Eve did. ``-1`` marks "not applicable"."""

    slot: np.ndarray
    measured_basis: np.ndarray
    guessed_bit: np.ndarray
    action: np.ndarray

    @classmethod
    def empty(cls) -> "EveLog":
        z = np.zeros(0, dtype=np.int8)
        return cls(np.zeros(0, dtype=np.int64), z, z.copy(), z.copy())

    @classmethod
    def build(cls, slot, basis, guess, action: str) -> "EveLog":
        slot = np.asarray(slot, dtype=np.int64)
        return cls(slot, np.broadcast_to(np.asarray(basis, dtype=np.int8), slot.shape).copy(),
                   np.asarray(guess, dtype=np.int8).copy(),
                   np.full(slot.shape, _ACTION[action], dtype=np.int8))

    def __len__(self):
        return len(self.slot)

    def guesses_for(self, slots: np.ndarray) -> np.ndarray:
        """Eve's guessed bit for each requested slot, -1 where she has none."""
        out = np.full(len(slots), -1, dtype=np.int8)
        if len(self.slot) == 0 or len(slots) == 0:
            return out
        idx = np.searchsorted(self.slot, slots)
        idx = np.clip(idx, 0, len(self.slot) - 1)
        hit = self.slot[idx] == slots
        out[hit] = self.guessed_bit[idx[hit]]
        return out

    def rows(self):
        for s, b, g, a in zip(self.slot.tolist(), self.measured_basis.tolist(),
                              self.guessed_bit.tolist(), self.action.tolist()):
            yield s, b, g, ACTIONS[a]


@dataclass(frozen=True)
class AttackContext:
    """What Eve knows about Bob's receiver."""

    detectors: tuple[DetectorParams, DetectorParams]
    schedule: GateSchedule

    def gate_close(self) -> float:
        return max(self.schedule.offsets[j] + self.detectors[j].curve.end for j in (0, 1))

    def gate_span(self) -> tuple[float, float]:
        lo = min(self.schedule.offsets[j] + self.detectors[j].curve.start for j in (0, 1))
        return lo, self.gate_close()

    def efficiencies(self, t):
        return tuple(efficiency_array(self.detectors[j].curve, np.asarray(t) - self.schedule.offsets[j])
                     for j in (0, 1))


def ideal_measure(angle, basis, rng):
    """Ideal projective measurement of linear polarizations in Z/X bases."""
    theta = np.where(basis == 1, 22.5, 0.0)
    rotated = np.mod(angle - 2.0 * theta, 180.0)
    p0 = 0.5 * (1.0 + np.cos(np.radians(2.0 * rotated)))
    return (rng.random(len(angle)) >= p0).astype(np.int8)


def encode_angles(bits, bases):
    return np.where(bases == 1, 45.0, 0.0) + 90.0 * bits


class EveStrategy:
    """Base strategy: the identity (passive Eve)."""

    kind: ClassVar[str] = "passive"

    def prepare(self, ctx: AttackContext) -> None:
        self.ctx = ctx

    def attack(self, batch: PulseBatch, rng: np.random.Generator) -> tuple[PulseBatch, EveLog]:
        return batch, EveLog.empty()

    def spoof_calibration(self, pulse: OpticalPulse) -> OpticalPulse:
        return pulse

    def forward(self, pulse: OpticalPulse, schedule: GateSchedule,
                rng: np.random.Generator) -> list[OpticalPulse]:
        """Scalar convenience wrapper: one input pulse, 0..N output pulses."""
        out, _ = self.attack(PulseBatch.from_pulses([pulse], schedule), rng)
        return out.to_pulses(schedule)

    def params(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)} if hasattr(self, "__dataclass_fields__") else {}


@dataclass
class Passive(EveStrategy):
    kind: ClassVar[str] = "passive"


def _single_photons(batch):
    if np.any(batch.intensity > 1.0):
        raise ValueError("intercept strategies expect single-photon pulses")


@dataclass
class InterceptResend(EveStrategy):
    """Measure each photon in a random Z/X basis and resend the result."""

    kind: ClassVar[str] = "intercept_resend"

    def attack(self, batch, rng):
        _single_photons(batch)
        basis = rng.integers(0, 2, len(batch), dtype=np.int8)
        bits = ideal_measure(batch.angle, basis, rng)
        out = PulseBatch(batch.slot, np.zeros(len(batch)), np.ones(len(batch)),
                         encode_angles(bits, basis))
        return out, EveLog.build(batch.slot, basis, bits, "resend")


@dataclass
class Breidbart(EveStrategy):
    """Intercept-resend with a fixed intermediate analyzer.

    Outcome 0 means the photon passed an analyzer oriented at
    ``analyzer_angle``; the post-measurement state is resent.
    """

    kind: ClassVar[str] = "breidbart"
    analyzer_angle: float = 22.5

    def __post_init__(self):
        if not math.isfinite(self.analyzer_angle):
            raise ParamError("analyzer_angle", "must be finite")

    def attack(self, batch, rng):
        _single_photons(batch)
        rel = np.mod(batch.angle - self.analyzer_angle, 180.0)
        p_pass = 0.5 * (1.0 + np.cos(np.radians(2.0 * rel)))
        bits = (rng.random(len(batch)) >= p_pass).astype(np.int8)
        angles = np.mod(self.analyzer_angle + 90.0 * bits, 180.0)
        out = PulseBatch(batch.slot, np.zeros(len(batch)), np.ones(len(batch)), angles)
        ang = self.analyzer_angle % 180.0
        basis = 0 if ang in (0.0, 90.0) else 1 if ang in (45.0, 135.0) else -1
        return out, EveLog.build(batch.slot, basis, bits, "resend")


def find_faked_times(ctx: AttackContext, step: float = 1e-3, blind_tol: float = 1e-12,
                     strict: bool = True) -> tuple[tuple[float, float], tuple[float, float]]:
    """Arrival offsets at which a faked bit-x photon can only click detector x.

    Returns ``((t0, t1), (ratio0, ratio1))`` where ``t_x`` is the time used
    to force outcome ``x``. Candidates maximize eta_live / eta_blind, then
    eta_live, then prefer the earliest time.
    """
    lo, hi = ctx.gate_span()
    grid = lo + step * np.arange(int(math.ceil((hi - lo) / step)) + 1)
    eta = ctx.efficiencies(grid)
    times, ratios = [], []
    for x in (0, 1):
        live, blind = eta[x], eta[1 - x]
        usable = live > 0
        if not usable.any():
            raise AttackUnavailable(f"detector D{x} never has non-zero efficiency")
        perfect = usable & (blind <= blind_tol)
        if perfect.any():
            cand = np.flatnonzero(perfect)
            i = cand[np.argmax(live[cand])]
            ratio = math.inf
        else:
            ratio_arr = np.where(usable, live / np.where(blind > 0, blind, 1.0), -1.0)
            best = ratio_arr.max()
            cand = np.flatnonzero(ratio_arr == best)
            i = cand[np.argmax(live[cand])]
            ratio = float(best)
            if strict:
                raise AttackUnavailable(
                    f"no time blinds D{1 - x} while D{x} is live; best efficiency ratio {ratio:.4g}",
                    best_ratio=ratio)
        times.append(float(grid[i]))
        ratios.append(ratio)
    return (times[0], times[1]), (ratios[0], ratios[1])


@dataclass
class FakedStatesDEM(EveStrategy):
    """Faked-states attack exploiting a temporal efficiency mismatch.

    Eve measures in basis b with result x and resends NOT(x) in basis NOT(b),
    timed so the NOT(x) detector is blind. Bob can then only click when he
    measures in b, and only on detector x.
    """

    kind: ClassVar[str] = "faked_states_dem"
    strict: bool = True
    scan_step: float = 1e-3
    blind_tol: float = 1e-12

    def __post_init__(self):
        if not self.scan_step > 0:
            raise ParamError("scan_step", "must be > 0")
        if not self.blind_tol >= 0:
            raise ParamError("blind_tol", "must be >= 0")

    def prepare(self, ctx):
        super().prepare(ctx)
        self.times, self.ratios = find_faked_times(ctx, self.scan_step, self.blind_tol, self.strict)

    def attack(self, batch, rng):
        _single_photons(batch)
        basis = rng.integers(0, 2, len(batch), dtype=np.int8)
        bits = ideal_measure(batch.angle, basis, rng)
        offsets = np.where(bits == 0, self.times[0], self.times[1])
        angles = encode_angles(1 - bits, 1 - basis)
        out = PulseBatch(batch.slot, offsets, np.ones(len(batch)), angles)
        return out, EveLog.build(batch.slot, basis, bits, "resend_faked")


@dataclass
class TimeShift(EveStrategy):
    """Forward photons unmeasured, moved to ``t_early`` or ``t_late``.

    ``choice`` is "random" (fair coin per slot), "early" or "late". Eve's
    guess for a slot is ``early_bit`` when shifted early, its complement when
    late.
    """

    kind: ClassVar[str] = "time_shift"
    t_early: float = -0.7
    t_late: float = 1.1
    choice: str = "random"
    early_bit: int = 0

    def __post_init__(self):
        if not self.t_early < 0.0:
            raise ParamError("t_early", "must precede the nominal arrival (0 ns)")
        if not self.t_late > 0.0:
            raise ParamError("t_late", "must follow the nominal arrival (0 ns)")
        if self.choice not in ("random", "early", "late"):
            raise ParamError("choice", "must be random, early or late")
        if self.early_bit not in (0, 1):
            raise ParamError("early_bit", "must be 0 or 1")

    def attack(self, batch, rng):
        n = len(batch)
        if self.choice == "random":
            late = rng.integers(0, 2, n).astype(bool)
        else:
            late = np.full(n, self.choice == "late")
        offsets = np.where(late, self.t_late, self.t_early)
        out = PulseBatch(batch.slot, offsets, batch.intensity, batch.angle)
        guess = np.where(late, 1 - self.early_bit, self.early_bit)
        log = EveLog.build(batch.slot, -1, guess, "shift_early")
        log.action[late] = _ACTION["shift_late"]
        return out, log

    def guess_accuracy(self, ctx: AttackContext | None = None) -> tuple[float, float]:
        """Per-click probability that Eve's guess is right at each shift time."""
        ctx = ctx or self.ctx
        out = []
        for t, bit in ((self.t_early, self.early_bit), (self.t_late, 1 - self.early_bit)):
            e0, e1 = (float(e) for e in ctx.efficiencies(t))
            total = e0 + e1
            out.append(0.5 if total == 0 else (e0 if bit == 0 else e1) / total)
        return out[0], out[1]


@dataclass
class AfterGate(EveStrategy):
    """Bright pulses timed after Bob's gate closes.

    Same-basis pulses put all power on one detector (above threshold, certain
    click); cross-basis pulses split power below threshold on both.
    """

    kind: ClassVar[str] = "after_gate"
    pulse_power: float = 1.5e5
    pulse_time_offset: float = 1.0
    send_probability: float = 1.0

    def __post_init__(self):
        if not self.pulse_power > 0:
            raise ParamError("pulse_power", "must be > 0")
        if not self.pulse_time_offset > 0:
            raise ParamError("pulse_time_offset", "must be > 0 (after the gate)")
        if not (0 < self.send_probability <= 1):
            raise ParamError("send_probability", "must be in (0, 1]")

    def prepare(self, ctx):
        super().prepare(ctx)
        thr = [d.bright_threshold for d in ctx.detectors]
        if not (max(thr) <= self.pulse_power < 2.0 * min(thr)):
            raise ParamError(
                "pulse_power",
                f"must satisfy threshold <= power < 2*threshold (thresholds {thr[0]:g}, {thr[1]:g})")
        self.arrival = ctx.gate_close() + self.pulse_time_offset
        if self.arrival >= ctx.schedule.period:
            raise ParamError("pulse_time_offset", "pulse would land in the next slot")

    def attack(self, batch, rng):
        _single_photons(batch)
        n = len(batch)
        basis = rng.integers(0, 2, n, dtype=np.int8)
        bits = ideal_measure(batch.angle, basis, rng)
        send = rng.random(n) < self.send_probability if self.send_probability < 1 else np.ones(n, bool)
        out = PulseBatch(batch.slot[send], np.full(send.sum(), self.arrival),
                         np.full(send.sum(), self.pulse_power), encode_angles(bits, basis)[send])
        return out, EveLog.build(batch.slot, basis, bits, "bright_after_gate")


@dataclass
class CalibrationSpoof(FakedStatesDEM):
    """Split calibration pulses into a D half and an A half ``delta`` ns apart.

    During key exchange the strategy runs the faked-states attack against the
    mismatch the spoof installed.
    """

    kind: ClassVar[str] = "calibration_spoof"
    delta: float = 0.4

    def __post_init__(self):
        super().__post_init__()
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ParamError("delta", "must be >= 0")

    def spoof_calibration(self, pulse: OpticalPulse) -> OpticalPulse:
        return calibration_spoof(pulse, self.delta)


def calibration_spoof(pulse: OpticalPulse, delta: float) -> OpticalPulse:
    """D-polarized first half, A-polarized second half, centroids ``delta`` apart."""
    if pulse.intensity <= 1.0:
        return pulse
    return OpticalPulse(pulse.slot, pulse.emission_time, pulse.arrival_time, pulse.intensity,
                        pulse.polarization, ((0.5, Polarization(D)), (0.5, Polarization(A))),
                        duration=2.0 * delta)


STRATEGIES = {cls.kind: cls for cls in
              (Passive, InterceptResend, Breidbart, FakedStatesDEM, TimeShift, AfterGate,
               CalibrationSpoof)}


def build_strategy(kind: str, params: dict | None = None) -> EveStrategy:
    """Instantiate a strategy by kind; unknown parameter names raise ParamError."""
    if kind not in STRATEGIES:
        raise ParamError("kind", f"unknown strategy {kind!r}; expected one of {sorted(STRATEGIES)}")
    cls = STRATEGIES[kind]
    params = dict(params or {})
    allowed = {f.name for f in fields(cls)}
    for key in params:
        if key not in allowed:
            raise ParamError(f"params.{key}", "unknown parameter")
    try:
        return cls(**params)
    except ParamError as exc:
        raise ParamError(f"params.{exc.field}", exc.reason) from None
