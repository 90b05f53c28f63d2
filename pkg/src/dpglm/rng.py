"""Counter-style reproducible random number handles.

Every randomized routine in this package takes an ``RngHandle``. A handle is
identified by a ``(seed, stream)`` pair; two handles with the same pair
produce the same sample sequence. Handles can be split deterministically with
:meth:`RngHandle.child`, so parallel sweep points draw independent,
reproducible streams without coordination.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RngHandle:
    """A single-owner random stream keyed by ``(seed, stream)``.

    The underlying generator is created lazily from a ``SeedSequence`` built
    from the pair, so reconstructing a handle with the same pair replays the
    exact sequence. Handles should not be shared between concurrent writers;
    split one child per task instead.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative integers")
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._gen: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
            self._gen = np.random.Generator(np.random.PCG64(seq))
        return self._gen

    def child(self, index: int) -> "RngHandle":
        """Derive an independent handle; deterministic in (seed, stream, index)."""
        mixed = _splitmix64(self.stream ^ _splitmix64(int(index) + 1))
        return RngHandle(self.seed, mixed)

    # Draw helpers used throughout the package. They advance the stream.
    def normal(self, scale: float, size=None) -> np.ndarray:
        return self.generator.normal(0.0, scale, size=size)

    def laplace(self, scale: float, size=None) -> np.ndarray:
        return self.generator.laplace(0.0, scale, size=size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size=size)

    def integers(self, low: int, high: int | None = None, size=None):
        return self.generator.integers(low, high, size=size)

    def beta(self, a: float, b: float, size=None) -> np.ndarray:
        return self.generator.beta(a, b, size=size)

    def standard_normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size=size)

    def __repr__(self) -> str:
        return f"RngHandle(seed={self.seed}, stream={self.stream})"
