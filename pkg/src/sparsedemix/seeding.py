"""Seed derivation rules.

All randomness flows from 64-bit integer seeds fed to ``numpy.random.default_rng``
(PCG64).  Child seeds are derived deterministically so that every sub-stream can
be reproduced in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def child_seeds(seed: int | None, count: int) -> list[int]:
    """``count`` independent 64-bit seeds spawned from ``seed`` via ``SeedSequence``."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(count)]


def trial_seed(master: int, cell: int, trial: int) -> int:
    """Per-trial seed: ``master XOR blake2b-64("cell:trial")``."""
    digest = hashlib.blake2b(f"{cell}:{trial}".encode(), digest_size=8).digest()
    return (int(master) ^ int.from_bytes(digest, "little")) & MASK64
