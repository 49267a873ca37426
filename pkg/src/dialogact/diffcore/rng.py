"""Seeded random number generation.

Every random draw in the toolkit goes through :class:`SeededRng` so that a
run is a deterministic function of its seed.
"""

import numpy as np


class SeededRng:
    """Thin wrapper around a PCG64 numpy generator with an explicit seed."""

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low, high, size):
        return self._gen.uniform(low, high, size)

    def normal(self, size, scale=1.0):
        return self._gen.normal(0.0, scale, size)

    def random(self, size):
        return self._gen.random(size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size)

    def spawn(self, key):
        """Derive an independent child generator from this seed and ``key``."""
        seq = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, int(key)])
        child = SeededRng.__new__(SeededRng)
        child.seed = self.seed
        child._gen = np.random.Generator(np.random.PCG64(seq))
        return child

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"
