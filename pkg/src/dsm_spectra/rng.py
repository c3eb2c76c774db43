"""Deterministic counter-based PRNG used for every random draw.

The generator is SplitMix64: raw output k (counting from 1) is
``finalize(word + k * GOLDEN) mod 2**64`` where ``finalize`` is the
standard 64-bit mixer

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

and GOLDEN = 0x9E3779B97F4A7C15. Uniform deviates keep the top 53
bits of the raw output, ``(raw >> 11) / 2**53``, which is exactly
representable in a double, so sequences are bit-identical across
platforms and languages.

Stream seeding packs (base_seed, rep_index, role) into one 64-bit
word, ``base_seed << 32 | rep_index << 8 | role``, with
base_seed < 2**32, rep_index < 2**24, role < 2**8. The packing is
injective on that domain, so no two triples share a stream.

Gaussians come from Box-Muller applied to consecutive uniform pairs:
for pair (u1, u2) drawn in that order,

    r = sqrt(-2 * log(1 - u1)),  a = 2 * pi * u2
    z1 = r * cos(a),  z2 = r * sin(a)

Vectorised generation consumes the stream in exactly the order a
scalar loop would, so batch size does not affect the values drawn.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import ConfigError

GOLDEN = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB
_MASK_64 = (1 << 64) - 1

MAX_BASE_SEED = 1 << 32
MAX_REP_INDEX = 1 << 24
MAX_ROLE = 1 << 8

_TWO_53 = float(1 << 53)


class Role(enum.IntEnum):
    """Stream roles, so one trial can own several independent streams."""

    COST = 0          # Sinkhorn cost-matrix entries
    NOISE = 1         # Gaussian feature noise (paired draws interleave here)
    NOISE_PRIME = 2   # second-side Gaussian noise when drawn separately
    INIT = 3          # initial feature directions / sphere samples
    INIT_ORTHO = 4    # orthogonal completion for correlated input pairs
    PROBE = 5         # probe vectors for contraction and norm checks
    PERTURB = 6       # perturbation draws for subspace-rotation sweeps


def mix64(z: int) -> int:
    """Reference finalizer on Python integers (used by tests as the
    oracle for the vectorised path)."""
    z &= _MASK_64
    z = ((z ^ (z >> 30)) * _MIX_1) & _MASK_64
    z = ((z ^ (z >> 27)) * _MIX_2) & _MASK_64
    return (z ^ (z >> 31)) & _MASK_64


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_2)
        return z ^ (z >> np.uint64(31))


def pack_stream_word(base_seed: int, rep_index: int, role: int) -> int:
    """Injective packing of (base_seed, rep_index, role) into 64 bits."""
    if not 0 <= base_seed < MAX_BASE_SEED:
        raise ConfigError(f"base_seed must be in [0, 2**32), got {base_seed}")
    if not 0 <= rep_index < MAX_REP_INDEX:
        raise ConfigError(f"rep_index must be in [0, 2**24), got {rep_index}")
    if not 0 <= role < MAX_ROLE:
        raise ConfigError(f"role must be in [0, 2**8), got {role}")
    return (base_seed << 32) | (rep_index << 8) | int(role)


class SplitMix64:
    """Counter-based SplitMix64 stream over a fixed 64-bit word."""

    def __init__(self, word: int):
        if not 0 <= word <= _MASK_64:
            raise ConfigError(f"stream word must fit in 64 bits, got {word}")
        self.word = word
        self._counter = 0  # raw outputs consumed so far

    def next_uint64(self) -> int:
        self._counter += 1
        return mix64((self.word + self._counter * GOLDEN) & _MASK_64)

    def raws(self, count: int) -> np.ndarray:
        """Next `count` raw 64-bit outputs as a uint64 array."""
        if count < 0:
            raise ConfigError(f"count must be >= 0, got {count}")
        ks = np.arange(self._counter + 1, self._counter + count + 1,
                       dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            states = np.uint64(self.word) + ks * np.uint64(GOLDEN)
        return _mix64_array(states)

    def uniforms(self, count: int) -> np.ndarray:
        """Next `count` uniforms on [0, 1) with 53-bit mantissas."""
        raw = self.raws(count)
        return (raw >> np.uint64(11)).astype(np.float64) / _TWO_53

    def normals(self, count: int) -> np.ndarray:
        """Next `count` standard normals via Box-Muller pairs.

        Consumes ceil(count/2) uniform pairs; for odd `count` the
        trailing sine output is discarded, exactly as a scalar loop
        emitting one value at a time would.
        """
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        u1 = u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        a = 2.0 * math.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(a)
        out[1::2] = r * np.sin(a)
        return out[:count]


def derive_stream(base_seed: int, rep_index: int, role: Role | int) -> SplitMix64:
    """Stream for one (trial, role); distinct triples never collide."""
    return SplitMix64(pack_stream_word(base_seed, rep_index, int(role)))
