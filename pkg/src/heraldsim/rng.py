"""Counter-based random streams.

Every random draw in a simulation comes from a Philox generator keyed by the
run seed plus a tuple naming *what* is being drawn (experiment, delay point,
pulse block, purpose).  A block's stream is therefore the same no matter which
worker process evaluates it or in which order blocks are scheduled.
"""
from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 1584


def _key_part(part):
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream key integers must be non-negative")
        return int(part)
    if isinstance(part, float):
        return zlib.crc32(repr(part).encode())
    return zlib.crc32(str(part).encode())


class StreamFactory:
    def __init__(self, seed=DEFAULT_SEED):
        self.seed = int(seed)

    def generator(self, *key):
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_key_part(k) for k in key))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *prefix):
        return _PrefixedFactory(self, prefix)

    def __repr__(self):
        return f"StreamFactory(seed={self.seed})"


class _PrefixedFactory(StreamFactory):
    def __init__(self, parent, prefix):
        self.seed = parent.seed
        self._prefix = tuple(getattr(parent, "_prefix", ())) + tuple(prefix)

    def generator(self, *key):
        return super().generator(*(self._prefix + key))
