"""Polarization encoding and waveplate + polarizing-beam-splitter routing.

Polarizations are linear and stored as a single angle in degrees, normalized
to [0, 180). Bob's basis choice is a half-wave plate followed by a PBS that
transmits H to D0 and reflects V to D1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

H, D, V, A = 0.0, 45.0, 90.0, 135.0


class Basis(IntEnum):
    """Measurement/preparation basis. Integer values are used in arrays."""

    Z = 0  # rectilinear, H/V
    X = 1  # diagonal, D/A

    @property
    def waveplate_angle(self) -> float:
        return 0.0 if self is Basis.Z else 22.5

    @property
    def other(self) -> "Basis":
        return Basis.X if self is Basis.Z else Basis.Z


def normalize_angle(angle: float) -> float:
    """Reduce an angle to [0, 180)."""
    out = math.fmod(angle, 180.0)
    if out < 0.0:
        out += 180.0
    if out >= 180.0:
        out = 0.0
    return out


@dataclass(frozen=True)
class Polarization:
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise ValueError(f"polarization angle must be finite, got {self.angle}")
        object.__setattr__(self, "angle", normalize_angle(self.angle))


def _check_bit(bit: int) -> int:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return int(bit)


def encode_bit(bit: int, basis: Basis) -> Polarization:
    """(0,Z)->H, (1,Z)->V, (0,X)->D, (1,X)->A."""
    bit = _check_bit(bit)
    base = 0.0 if Basis(basis) is Basis.Z else 45.0
    return Polarization(base + 90.0 * bit)


def waveplate_rotate(pol: Polarization, theta: float) -> Polarization:
    """Rotate a linear polarization by ``-2 * theta`` (half-wave plate at theta)."""
    if not math.isfinite(theta):
        raise ValueError("waveplate angle must be finite")
    return Polarization(pol.angle - 2.0 * theta)


def transmit_probability(angle: float) -> float:
    """cos^2 of the angle (degrees) via the double-angle form.

    The double-angle form keeps the basis-aligned cases exact: 0 deg gives 1.0
    and 90 deg gives 0.0.
    """
    return 0.5 * (1.0 + math.cos(math.radians(2.0 * angle)))


def detection_probabilities(pol: Polarization, basis: Basis) -> tuple[float, float]:
    """Probabilities (pD0, pD1) that a photon is routed to D0 / D1."""
    rotated = waveplate_rotate(pol, Basis(basis).waveplate_angle)
    p0 = transmit_probability(rotated.angle)
    return p0, 1.0 - p0


def decode_bit(pol: Polarization, basis: Basis) -> int | None:
    """Bit carried by ``pol`` if it is an eigenstate of ``basis``, else None."""
    p0, p1 = detection_probabilities(pol, basis)
    if p0 == 1.0:
        return 0
    if p1 == 1.0:
        return 1
    return None
