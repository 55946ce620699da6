"""Portable, seedable random number generation.

Two generators are used in the package:

* ``Xoshiro256StarStar`` -- a self-contained implementation of the
  xoshiro256** algorithm (Blackman & Vigna, 2018).  Corpus splitting is
  required to reproduce byte-for-byte across platforms and interpreter
  versions, so it must not depend on numpy's generator internals.  The
  algorithm is fully specified here: state is four 64-bit words seeded
  via splitmix64; doubles are drawn as ``(x >> 11) * 2**-53``; integers
  below ``n`` as ``floor(u * n)``.
* numpy ``Generator(PCG64(seed))`` streams for everything that only
  needs run-to-run determinism (parameter init, dropout masks, Gibbs
  uniforms, epoch shuffles).  Their states serialize into checkpoints
  so training can resume bit-for-bit.
"""

import zlib

import numpy as np

_U64 = np.uint64
_MASK = _U64(0xFFFFFFFFFFFFFFFF)
_D53 = float(2.0 ** -53)


def _splitmix64(state):
    """One splitmix64 step; returns (new_state, output), both uint64."""
    state = (state + _U64(0x9E3779B97F4A7C15)) & _MASK
    z = state
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)) & _MASK
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)) & _MASK
    z = z ^ (z >> _U64(31))
    return state, z


def _rotl(x, k):
    return ((x << _U64(k)) | (x >> _U64(64 - k))) & _MASK


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 seeding.

    All arithmetic runs on numpy uint64 scalars so overflow wraps
    identically everywhere.
    """

    def __init__(self, seed):
        with np.errstate(over="ignore"):
            sm = _U64(int(seed) & 0xFFFFFFFFFFFFFFFF)
            s = []
            for _ in range(4):
                sm, out = _splitmix64(sm)
                s.append(out)
        self._s = s

    def get_state(self):
        return tuple(int(x) for x in self._s)

    def set_state(self, state):
        self._s = [_U64(x) for x in state]

    def next_uint64(self):
        with np.errstate(over="ignore"):
            s0, s1, s2, s3 = self._s
            result = (_rotl((s1 * _U64(5)) & _MASK, 7) * _U64(9)) & _MASK
            t = (s1 << _U64(17)) & _MASK
            s2 = s2 ^ s0
            s3 = s3 ^ s1
            s1 = s1 ^ s2
            s0 = s0 ^ s3
            s2 = s2 ^ t
            s3 = _rotl(s3, 45)
            self._s = [s0, s1, s2, s3]
        return result

    def random(self):
        """Uniform double in [0, 1) with 53 bits of precision."""
        return float(self.next_uint64() >> _U64(11)) * _D53

    def randbelow(self, n):
        """Integer in [0, n) as floor(u * n)."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        return min(int(self.random() * n), n - 1)

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def pcg_stream(seed, stream):
    """Independent numpy generator for (seed, stream-name)."""
    key = zlib.crc32(str(stream).encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(key,))
    return np.random.Generator(np.random.PCG64(ss))


def generator_state(gen):
    """JSON-serializable state of a numpy Generator."""
    return gen.bit_generator.state


def restore_generator(state):
    gen = np.random.Generator(np.random.PCG64())
    gen.bit_generator.state = state
    return gen
