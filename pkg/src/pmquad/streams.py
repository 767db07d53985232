"""Per-trial random streams.

Every trial gets its own generator, keyed by (master_seed, cell, trial) through
a SplitMix64 finalizer and fed to numpy's PCG64. Results therefore do not
depend on how trials are distributed over workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN64) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(master_seed: int, trial: int, cell: int = 0) -> int:
    k = splitmix64(master_seed & MASK64)
    k = splitmix64(k ^ (cell & MASK64))
    return splitmix64((k + trial) & MASK64)


def derive_stream(master_seed: int, trial: int, cell: int = 0) -> np.random.Generator:
    """Independent PCG64 generator for one trial of one experiment cell."""
    return np.random.Generator(np.random.PCG64(stream_key(master_seed, trial, cell)))


def open_uniform(rng: np.random.Generator) -> float:
    """Uniform draw on the open interval (0, 1)."""
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u
