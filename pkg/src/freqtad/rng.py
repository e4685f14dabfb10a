"""Deterministic random numbers with independent child streams."""

from __future__ import annotations

import numpy as np


class Rng:
    """Counter-based (Philox) generator behind a small drawing API.

    The same seed yields the same stream on every platform. Child streams
    are keyed by index, so consuming one stream never shifts another;
    dataset generation and parameter init rely on that isolation.
    """

    def __init__(self, seed: int, _spawn_key: tuple = ()):
        self.seed = int(seed)
        self._spawn_key = tuple(int(k) for k in _spawn_key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self._spawn_key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "Rng":
        """A substream addressed by index, independent of this stream."""
        return Rng(self.seed, self._spawn_key + (int(index),))

    def draw_normal(self, shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        if std < 0:
            raise ValueError("std must be >= 0")
        if std == 0:
            return np.full(shape, float(mean))
        return self._gen.normal(loc=mean, scale=std, size=shape)

    def draw_uniform(self, low: float = 0.0, high: float = 1.0, shape=None):
        return self._gen.uniform(low, high, size=shape)

    def draw_int(self, low: int, high: int) -> int:
        """Uniform integer in [low, high] inclusive."""
        return int(self._gen.integers(low, high + 1))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
