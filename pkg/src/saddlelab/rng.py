"""Deterministic seed derivation and chunked noise streams.

Every trajectory owns an independent generator keyed by
derive_seed(base_seed, *indices); the rule is a pure function of its
arguments, so trial i produces the same path whether it runs alone, in a
batch, or on a worker process.  All simulators consume their generator in
fixed-size chunks (NOISE_CHUNK draws at a time), which keeps batched,
time-chunked execution on exactly the same per-trial stream as a
straight single-trajectory run.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NOISE_CHUNK", "TRIAL_CAP", "derive_seed", "make_rng", "chunk_ranges"]

NOISE_CHUNK = 8192
TRIAL_CAP = 1024  # batch runners split wider trial sets to bound buffer memory


def derive_seed(base_seed: int, *indices: int) -> int:
    """Fixed splitting rule: (base, i, j, ...) -> 64-bit stream key."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def chunk_ranges(n: int, chunk: int = NOISE_CHUNK):
    """Yield (start, stop) pairs covering range(n) in fixed-size chunks."""
    start = 0
    while start < n:
        stop = min(start + chunk, n)
        yield start, stop
        start = stop
