"""Seeded, explicitly specified PRNG used by every stochastic component.

The generator is splitmix64 driven by a counter, so a stream is a pure
function of (seed, index) and can be produced either one value at a time
or as a whole numpy array. The exact recipe, for reimplementation in any
language (all arithmetic mod 2**64):

    state_i = seed + i * 0x9E3779B97F4A7C15          # i = 1, 2, 3, ...
    z = state_i
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z = z ^ (z >> 31)

Derived values:
    uniform in [0, 1):   (z >> 11) * 2**-53
    integer in [0, n):   z % n                       (documented modulo choice)
    standard normal:     Box-Muller on consecutive uniform pairs,
                         sqrt(-2 ln(1 - u1)) * cos(2 pi u2)

Independent substreams come from `derive(seed, label)`, which mixes the
label into the seed with a second odd constant before hashing.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_LABEL = 0xD1B54A32D192ED03
_MASK = (1 << 64) - 1


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive(seed: int, label: int) -> int:
    """Derive the seed of an independent substream."""
    return _mix((seed + label * _LABEL) & _MASK)


def u64_stream(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Values offset+1 .. offset+n of the splitmix64 stream, as uint64."""
    idx = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK) + idx * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def uniform_stream(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """n doubles in [0, 1), 53-bit mantissa resolution."""
    z = u64_stream(seed, n, offset)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def normal_stream(seed: int, n: int) -> np.ndarray:
    """n standard normals via Box-Muller on pairs of uniforms."""
    m = (n + 1) // 2
    u = uniform_stream(seed, 2 * m)
    u1, u2 = u[:m], u[m:]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    return out[:n]


class SplitMix64:
    """Sequential view of the same stream, for ordered scalar decisions."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK
        self._count = 0

    def next_u64(self) -> int:
        self._count += 1
        return _mix((self._seed + self._count * _GOLDEN) & _MASK)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] inclusive; hi >= lo."""
        span = hi - lo + 1
        if span <= 0:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.next_u64() % span

    def choice(self, items):
        return items[self.randint(0, len(items) - 1)]
