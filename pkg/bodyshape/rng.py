"""
Deterministic pseudo-random numbers from a single unsigned 64-bit seed.

Every stochastic step in ``bodyshape`` (silhouette generation, augmentation,
k-means seeding, weight initialisation, shuffling) draws from a
:class:`SplitMix64` stream, so a run is reproducible from its ``--seed``
alone and does not depend on the numpy version's generator internals.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix_scalar(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *keys: int) -> int:
    """
    Derive an independent child seed from ``seed`` and integer ``keys``.

    Used to give every generated sample or restart its own stream while
    keeping the whole run a function of one seed.
    """
    state = int(seed) & _MASK64
    for key in keys:
        state = _mix_scalar((state + _GAMMA + (int(key) & _MASK64))
                            & _MASK64)
    return state


class SplitMix64:
    """
    The splitmix64 generator with vectorised numpy draws.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK64
        self._state = self.seed

    def __repr__(self) -> str:
        return f'SplitMix64(seed={self.seed})'

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix_scalar(self._state)

    def u64(self, size: int) -> np.ndarray:
        """Draw ``size`` raw 64-bit outputs as a ``uint64`` array."""
        size = int(size)
        if size < 0:
            raise ValueError('size must be nonnegative')
        steps = np.arange(1, size + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        states = np.uint64(self._state) + steps
        self._state = (self._state + size * _GAMMA) & _MASK64
        return _mix_array(states)

    def random(self, size: Optional[int] = None):
        """Uniform doubles in [0, 1) with 53 random bits."""
        if size is None:
            return (self.next_u64() >> 11) * 2.0 ** -53
        return (self.u64(size) >> np.uint64(11)).astype(np.float64) \
            * 2.0 ** -53

    def uniform(self, low: float = 0.0, high: float = 1.0,
                size: Optional[int] = None):
        return low + (high - low) * self.random(size)

    def normal(self, loc: float = 0.0, scale: float = 1.0,
               size: Optional[int] = None):
        """Gaussian draws via the Box-Muller transform."""
        n = 1 if size is None else int(size)
        u1 = 1.0 - self.random(n)
        u2 = self.random(n)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        out = loc + scale * z
        return float(out[0]) if size is None else out

    def integers(self, high: int, size: Optional[int] = None):
        """Integers uniform over ``[0, high)``."""
        if high < 1:
            raise ValueError('high must be at least 1')
        if size is None:
            return min(int(self.random() * high), high - 1)
        draws = np.floor(self.random(size) * high).astype(np.int64)
        return np.minimum(draws, high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly shuffled ``arange(n)``."""
        return np.argsort(self.random(n), kind='stable')

    def choice(self, weights: Sequence[float]) -> int:
        """
        Draw one index with probability proportional to ``weights``.

        Raises
        ------
        ValueError
            If the weights are negative or all zero.
        """
        weights = np.asarray(weights, dtype=np.float64)
        if np.any(weights < 0):
            raise ValueError('weights must be nonnegative')
        cumulative = np.cumsum(weights)
        total = cumulative[-1] if cumulative.size else 0.0
        if total <= 0:
            raise ValueError('weights sum to zero')
        target = self.random() * total
        index = int(np.searchsorted(cumulative, target, side='right'))
        return min(index, len(weights) - 1)

    def spawn(self, *keys: int) -> SplitMix64:
        """A child generator seeded from this one's seed and ``keys``."""
        return SplitMix64(derive_seed(self.seed, *keys))
