"""Deterministic, portable random number generation.

All stochastic behaviour in this package (phantom noise, network weight
initialization) is driven by a counter-based SplitMix64 generator so that
identical seeds give bit-identical streams on every platform and in every
language that reimplements the constants below.

Generator definition (all arithmetic modulo 2**64):

    state_i  = seed + (i + 1) * 0x9E3779B97F4A7C15        # i = 0, 1, 2, ...
    z        = state_i
    z       ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z       ^= z >> 27;  z *= 0x94D049BB133111EB
    z       ^= z >> 31
    output_i = z                                           # 64-bit word i

Derived quantities:

    uniform double in [0, 1):   (output >> 11) * 2**-53
    standard normals:           Box-Muller on consecutive uniform pairs,
                                r = sqrt(-2*ln(1 - u1)),
                                g0 = r*cos(2*pi*u2), g1 = r*sin(2*pi*u2)

Substreams are derived with ``derive_seed(seed, label)`` which mixes the
label into the seed; see below.
"""

from __future__ import annotations

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF

_TO_DOUBLE = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a single 64-bit word (Python int in, int out)."""
    z &= _MASK
    z ^= z >> 30
    z = (z * _MIX1) & _MASK
    z ^= z >> 27
    z = (z * _MIX2) & _MASK
    z ^= z >> 31
    return z


def derive_seed(seed: int, label: int) -> int:
    """Derive an independent substream seed from (seed, label)."""
    return mix64((seed & _MASK) ^ mix64(label))


class SplitMix64:
    """Counter-based SplitMix64 stream with a persistent draw counter.

    Successive calls continue the stream; two instances with the same seed
    produce the same sequence regardless of how draws are batched.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self.counter = 0

    def next_uint64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = (np.uint64(self.seed) + idx * np.uint64(_GAMMA)).astype(np.uint64)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        return z

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * _TO_DOUBLE
        if low != 0.0 or high != 1.0:
            u = low + (high - low) * u
        return u

    def normal(self, n: int) -> np.ndarray:
        """n standard normal deviates via Box-Muller (consumes 2*ceil(n/2) words)."""
        half = (n + 1) // 2
        u = self.uniform(2 * half)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * half, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def complex_normal(self, shape) -> np.ndarray:
        """Complex array with independent standard-normal real/imag parts."""
        n = int(np.prod(shape))
        g = self.normal(2 * n)
        return (g[0::2] + 1j * g[1::2]).reshape(shape)
