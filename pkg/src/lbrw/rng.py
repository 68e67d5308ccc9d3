"""Reproducible random streams.

Streams are keyed by ``(master_seed, stream_id)`` and backed by numpy's
counter-based Philox bit generator, so a stream's draws do not depend on
how many other streams exist or in which order workers consume them.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_id(tag: str, *indices: int) -> int:
    """Stable 64-bit id for ``(tag, indices...)``; independent of PYTHONHASHSEED."""
    key = ":".join([tag, *(str(int(i)) for i in indices)]).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, tag: str, *indices: int) -> "RngStream":
        return RngStream(self.master_seed, stream_id(tag, self.stream_id, *indices))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")
