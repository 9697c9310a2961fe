"""Seeded random streams.

Every trajectory gets its own counter-based (Philox) stream derived from a
master seed, a stream name and the trajectory index, so generation can be
split across workers without changing a single bit of output.
"""
import zlib

import numpy as np


def _stream_code(name):
    return zlib.crc32(name.encode("utf-8"))


def derive_seed(master_seed, index=0, stream="default"):
    """Return a 63-bit integer seed for ``(master_seed, stream, index)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(_stream_code(stream), int(index)))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def make_rng(seed):
    """Build a Philox generator from an int, a SeedSequence or pass a Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required for reproducible streams")
    return np.random.Generator(np.random.Philox(seed))


def stream(master_seed, index=0, name="default"):
    return make_rng(derive_seed(master_seed, index, name))
