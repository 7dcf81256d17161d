"""SplitMix64 random stream.

Every stochastic component in the package draws from this generator so that a
seed means the same thing regardless of numpy version or host language:

* state advances by ``GAMMA = 0x9E3779B97F4A7C15`` (mod 2**64) before each draw;
* output is the standard SplitMix64 finalizer of the new state;
* ``random()`` maps a draw ``x`` to ``(x >> 11) * 2**-53``;
* ``integers(n)`` is ``floor(random() * n)``;
* ``normal()`` is Box-Muller over two consecutive uniforms ``u1, u2``:
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.

Because output ``k`` depends only on ``seed + k * GAMMA``, batches can be drawn
with numpy and are bit-identical to the scalar path.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Deterministic 64-bit generator; see module docstring for the exact recipe."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & MASK64
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def _u64_batch(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GAMMA)
            out = _mix64_array(states)
        self.state = (self.state + n * GAMMA) & MASK64
        return out

    def random(self, size: int | None = None):
        if size is None:
            return (self.next_u64() >> 11) * _INV_2_53
        return (self._u64_batch(int(size)) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def integers(self, n: int, size: int | None = None):
        if n < 1:
            raise ValueError("n must be >= 1")
        if size is None:
            return int(self.random() * n)
        return np.floor(self.random(size) * n).astype(np.int64)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def normal(self, loc: float = 0.0, scale: float = 1.0) -> float:
        u1 = self.random()
        u2 = self.random()
        return loc + scale * math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def spawn(self, stream: int) -> "SplitMix64":
        """Independent child stream keyed by ``stream``; does not advance ``self``."""
        return SplitMix64(mix64(self.seed ^ mix64((int(stream) + 1) * GAMMA)))
