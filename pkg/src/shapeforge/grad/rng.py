"""Deterministic, splittable random streams.

Every stochastic operation in the project draws from an explicitly passed
`numpy.random.Generator`. Streams are derived from a single run seed plus a
tuple of tags (strings/ints), so the same (seed, tags) always yields the same
counter-based Philox stream regardless of creation order.
"""

import hashlib

import numpy as np


def derive_key(seed, *tags):
    """128-bit Philox key from a run seed and a tag tuple."""
    h = hashlib.blake2b(digest_size=16)
    h.update(repr((int(seed),) + tags).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def stream(seed, *tags):
    """Independent Generator for (seed, *tags)."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *tags)))


class StreamPool:
    """Holds a run seed and hands out named child streams."""

    def __init__(self, seed):
        self.seed = int(seed)

    def stream(self, *tags):
        return stream(self.seed, *tags)

    def child(self, *tags):
        """Pool whose streams are namespaced under the given tags."""
        return StreamPool(derive_key(self.seed, "child", *tags) % (2**63))
