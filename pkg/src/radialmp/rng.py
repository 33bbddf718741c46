"""Deterministic random probes.

All randomness in the package flows from a single 64-bit seed through
SplitMix64 (Steele, Lea, Flood: "Fast splittable pseudorandom number
generators"), so probe fields are byte-reproducible across runs and
platforms.  Doubles are drawn with the usual 53-bit construction.
"""

from __future__ import annotations

import numpy as np

from .grids import RadialField, RadialGrid

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


class SplitMix64:
    """SplitMix64 stream seeded by a single u64."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _M1) & _MASK
        z = ((z ^ (z >> 27)) * _M2) & _MASK
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0 ** -53
        return lo + (hi - lo) * u

    def split(self) -> "SplitMix64":
        """Independent child stream (handy for per-task determinism)."""
        return SplitMix64(self.next_u64())


def random_smooth_field(grid: RadialGrid, rng: SplitMix64, n_modes: int = 8,
                        amplitude: float = 1.0) -> RadialField:
    """Random smooth radial field vanishing at r = R.

    Superposition of cos((k-1/2) pi r / R) modes with 1/k-damped random
    coefficients; each mode has zero slope at the origin and a Dirichlet
    zero at R, so the result is an admissible H^1_0 test field.
    """
    r = grid.r
    vals = np.zeros_like(r)
    for k in range(1, n_modes + 1):
        c = rng.uniform(-1.0, 1.0) / k
        vals += c * np.cos((k - 0.5) * np.pi * r / grid.R)
    vals *= amplitude
    vals[-1] = 0.0
    return RadialField(grid, vals)
