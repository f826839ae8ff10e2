"""Deterministic stream splitting.

Every random stream in a session is seeded by::

    blake2b(f"{master_seed}:{trial}:{label}".encode(), digest_size=8)

read as an unsigned little-endian 64-bit integer and fed to numpy's PCG64.
Streams therefore depend only on (seed, trial, label), never on execution
order or the number of worker processes.
"""
from __future__ import annotations

import hashlib

import numpy as np

STREAMS = ("alice", "channel", "bob", "detector", "eve", "sampling", "schedule", "calibration")


def derive_seed(master_seed: int, trial: int, label: str) -> int:
    digest = hashlib.blake2b(f"{int(master_seed)}:{int(trial)}:{label}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def stream(master_seed: int, trial: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, trial, label)))


class Streams:
    """Lazily created named generators for one (seed, trial)."""

    def __init__(self, master_seed: int, trial: int = 0):
        self.master_seed = int(master_seed)
        self.trial = int(trial)
        self._cache: dict[str, np.random.Generator] = {}

    def __getitem__(self, label: str) -> np.random.Generator:
        if label not in self._cache:
            self._cache[label] = stream(self.master_seed, self.trial, label)
        return self._cache[label]
