"""BB84 session engine: source, channel, Eve, Bob, sifting, QBER, abort.

A session is a sequential pipeline over slot arrays. Bob's detector loop is
the compiled (or pure-Python) kernel from :mod:`qkdlab._kernels`; it is run
in fixed-size chunks so the detector random stream does not depend on the
session length beyond the chunk boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .attacks import AttackContext, EveLog, EveStrategy, encode_angles
from .detector import ClickKind, DetectorState, GateSchedule, param_matrix
from .pulses import PulseBatch
from .rng import Streams

CHUNK = 1 << 16


@dataclass
class AliceRecords:
    slot: np.ndarray
    bit: np.ndarray
    basis: np.ndarray
    emission_time: np.ndarray

    def __len__(self):
        return len(self.slot)


@dataclass
class BobRecords:
    """Bob's per-slot log. ``timestamp`` is Bob-internal full precision,
    ``revealed_timestamp`` the publicly announced value. Both are relative
    to the slot's nominal arrival time; NaN when nothing clicked."""

    slot: np.ndarray
    basis: np.ndarray
    outcome: np.ndarray
    timestamp: np.ndarray
    revealed_timestamp: np.ndarray

    def __len__(self):
        return len(self.slot)


@dataclass
class SiftedKey:
    slot: np.ndarray
    alice_bit: np.ndarray
    bob_bit: np.ndarray

    def __len__(self):
        return len(self.slot)

    @classmethod
    def empty(cls) -> "SiftedKey":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int8), np.zeros(0, np.int8))

    def take(self, idx) -> "SiftedKey":
        return SiftedKey(self.slot[idx], self.alice_bit[idx], self.bob_bit[idx])


@dataclass
class RunStats:
    pulses_sent: int
    pulses_detected: int
    sifted_bits: int
    sampled_bits: int
    sample_errors: int
    final_key_bits: int
    double_clicks: int
    sift_fraction: float
    qber: float
    qber_defined: bool
    abort: bool
    eve_known_fraction: float
    detection_rate: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SessionResult:
    stats: RunStats
    alice: AliceRecords
    bob: BobRecords
    sifted: SiftedKey
    final_key: SiftedKey
    eve_log: EveLog
    schedule: GateSchedule
    info: dict = field(default_factory=dict)


# --- sifting / QBER / abort ------------------------------------------------

def sift(alice: AliceRecords, bob: BobRecords) -> SiftedKey:
    """Keep slots where bases match and exactly one detector clicked."""
    if not np.array_equal(alice.slot, bob.slot):
        raise ValueError("alice and bob records must share the slot index space")
    single = (bob.outcome == ClickKind.D0) | (bob.outcome == ClickKind.D1)
    keep = single & (alice.basis == bob.basis)
    bob_bit = (bob.outcome[keep] == ClickKind.D1).astype(np.int8)
    return SiftedKey(alice.slot[keep], alice.bit[keep].astype(np.int8), bob_bit)


def estimate_qber(key: SiftedKey, sample_fraction: float, rng: np.random.Generator):
    """Compare a random subset publicly and discard it.

    Returns ``(qber, remaining, sampled, errors)``; ``qber`` is NaN when the
    key is empty.
    """
    if not (0 < sample_fraction <= 1):
        raise ValueError("sample_fraction must be in (0, 1]")
    n = len(key)
    if n == 0:
        return math.nan, key, 0, 0
    k = max(1, int(round(sample_fraction * n)))
    chosen = np.zeros(n, dtype=bool)
    chosen[rng.choice(n, size=k, replace=False)] = True
    errors = int(np.count_nonzero(key.alice_bit[chosen] != key.bob_bit[chosen]))
    return errors / k, key.take(~chosen), k, errors


def abort_decision(qber: float, threshold: float = 0.11) -> bool:
    """Abort iff QBER exceeds the threshold; an undefined QBER aborts."""
    if qber is None or math.isnan(qber):
        return True
    if not 0 <= qber <= 1:
        raise ValueError("qber must be in [0, 1]")
    return qber > threshold


def eve_info_accounting(key: SiftedKey, eve_log: EveLog, rng: np.random.Generator) -> float:
    """Fraction of key bits Eve guesses right; blind guesses where she has none."""
    if len(key) == 0:
        return math.nan
    guess = eve_log.guesses_for(key.slot)
    missing = guess < 0
    if missing.any():
        guess[missing] = rng.integers(0, 2, int(missing.sum()), dtype=np.int8)
    return float(np.mean(guess == key.alice_bit))


def truncate(values: np.ndarray, resolution: float) -> np.ndarray:
    """Round to the nearest multiple of ``resolution``; 0 leaves values as is."""
    if resolution <= 0:
        return values.copy()
    return np.round(values / resolution) * resolution


# --- detector loop driver ----------------------------------------------------

def run_detectors(num_slots: int, bob_basis: np.ndarray, pulses: PulseBatch, detectors,
                  schedule: GateSchedule, rng: np.random.Generator,
                  state: DetectorState | None = None, kernel=None, first_slot: int = 0):
    """Run Bob's detector pair over ``num_slots`` consecutive gates.

    Random numbers are drawn per chunk of :data:`CHUNK` slots in the order
    slot uniforms, jitter normals, pulse uniforms.
    """
    kernel = kernel or _kernels.simulate_slots
    state = state or DetectorState()
    dead, armed = state.arrays()
    params = param_matrix(detectors)
    offsets = np.array(schedule.offsets, dtype=float)
    kinds = np.empty(num_slots, dtype=np.int8)
    stamps = np.empty(num_slots)
    bob_basis = np.ascontiguousarray(bob_basis, dtype=np.int8)
    for lo in range(0, num_slots, CHUNK):
        hi = min(lo + CHUNK, num_slots)
        n = hi - lo
        sub = pulses.slot_range(first_slot + lo, first_slot + hi)
        m = len(sub)
        u_slot = rng.random((n, 2, 4))
        z = rng.standard_normal((n, 2))
        u_pulse = rng.random((m, 2))
        k, s = kernel(first_slot + lo, bob_basis[lo:hi], schedule.period, schedule.origin,
                      np.ascontiguousarray(sub.slot), np.ascontiguousarray(sub.offset),
                      np.ascontiguousarray(sub.intensity), np.ascontiguousarray(sub.angle),
                      params, offsets, u_pulse, u_slot, z, dead, armed)
        kinds[lo:hi] = k
        stamps[lo:hi] = s
    state.update(dead, armed)
    return kinds, stamps


# --- session ---------------------------------------------------------------

def run_session(config, strategy: EveStrategy | None = None, trial: int = 0,
                schedule: GateSchedule | None = None, kernel=None) -> SessionResult:
    """Run one seeded BB84 session.

    ``strategy`` defaults to the one named in ``config``. ``schedule``
    overrides the configured gate schedule (used after calibration).
    """
    streams = Streams(config.seed, trial)
    if strategy is None:
        strategy = config.strategy.build()

    nominal = schedule or config.gate_schedule()
    extra = 0.0
    if config.schedule.random_mismatch is not None:
        lo, hi = config.schedule.random_mismatch
        extra = float(streams["schedule"].uniform(lo, hi))
    actual = GateSchedule(nominal.period, nominal.gate_offset_d0,
                          nominal.gate_offset_d1 + extra, nominal.origin)
    if strategy is not None:
        # Eve knows the nominal receiver, not a per-session random mismatch.
        strategy.prepare(AttackContext(config.detectors, nominal))

    M = int(config.num_pulses)
    slots = np.arange(M, dtype=np.int64)
    alice_rng = streams["alice"]
    bits = alice_rng.integers(0, 2, M, dtype=np.int8)
    bases = alice_rng.integers(0, 2, M, dtype=np.int8)
    alice = AliceRecords(slots, bits, bases, slots * actual.period)

    arrived = np.ones(M, dtype=bool)
    if config.channel.loss > 0:
        arrived = streams["channel"].random(M) >= config.channel.loss
    batch = PulseBatch(slots[arrived], np.zeros(arrived.sum()), np.ones(arrived.sum()),
                       encode_angles(bits[arrived], bases[arrived]))
    eve_log = EveLog.empty()
    if strategy is not None:
        batch, eve_log = strategy.attack(batch, streams["eve"])
        batch = batch.sorted()

    bob_basis = streams["bob"].integers(0, 2, M, dtype=np.int8)
    kinds, stamps = run_detectors(M, bob_basis, batch, config.detectors, actual,
                                  streams["detector"], kernel=kernel)
    bob = BobRecords(slots, bob_basis, kinds, stamps, truncate(stamps, config.timestamp_resolution))

    key = sift(alice, bob)
    qber, remaining, sampled, errors = estimate_qber(key, config.sample_fraction, streams["sampling"])
    eve_known = eve_info_accounting(remaining, eve_log, streams["eve"])
    detected = int(np.count_nonzero(kinds != ClickKind.NONE))
    stats = RunStats(
        pulses_sent=M,
        pulses_detected=detected,
        sifted_bits=len(key),
        sampled_bits=sampled,
        sample_errors=errors,
        final_key_bits=len(remaining),
        double_clicks=int(np.count_nonzero(kinds == ClickKind.BOTH)),
        sift_fraction=len(key) / detected if detected else math.nan,
        qber=qber,
        qber_defined=not math.isnan(qber),
        abort=abort_decision(qber, config.qber_threshold),
        eve_known_fraction=eve_known,
        detection_rate=detected / M if M else math.nan,
    )
    info = {"gate_offset_d0": actual.gate_offset_d0, "gate_offset_d1": actual.gate_offset_d1}
    return SessionResult(stats, alice, bob, key, remaining, eve_log, actual, info)
