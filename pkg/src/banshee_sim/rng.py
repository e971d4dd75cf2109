"""Named, seedable PRNG streams.

Every consumer asks for the stream of an ``(mc, purpose)`` pair. Streams are
derived independently from the run seed, so adding a consumer never shifts the
draws another consumer sees.
"""

from __future__ import annotations

import random

import numpy as np

PURPOSES = {
    "sample": 0,
    "candidate": 1,
    "fill": 2,
    "workload": 3,
}

_VECTOR = 1 << 16


def _derive(seed: int, key: tuple[int, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed & ((1 << 64) - 1), spawn_key=key)


class Streams:
    def __init__(self, seed: int) -> None:
        self.seed = seed
        self._cache: dict[tuple[int, str], random.Random] = {}

    def get(self, mc: int, purpose: str) -> random.Random:
        """Return the stream for (mc, purpose); repeated calls return the same object."""
        k = (mc, purpose)
        rng = self._cache.get(k)
        if rng is None:
            state = _derive(self.seed, (mc, PURPOSES[purpose])).generate_state(2, np.uint64)
            rng = random.Random(int(state[0]) << 64 | int(state[1]))
            self._cache[k] = rng
        return rng

    def numpy(self, purpose: str, *extra: int) -> np.random.Generator:
        """Fresh vectorised generator, used by the trace generators."""
        # The leading marker keeps these keys disjoint from the per-MC ones.
        return np.random.Generator(np.random.PCG64(_derive(self.seed, (_VECTOR, PURPOSES[purpose], *extra))))
