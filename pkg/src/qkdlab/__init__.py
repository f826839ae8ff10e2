"""Seeded BB84 laboratory with detector imperfections and timing attacks."""

__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402
from .optics import Basis, Polarization, detection_probabilities, encode_bit, waveplate_rotate  # noqa: E402

__all__ = ["BACKEND", "Basis", "Polarization", "detection_probabilities", "encode_bit",
           "waveplate_rotate", "__version__"]
