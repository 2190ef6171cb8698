"""Deterministic 64-bit random number generator (xoshiro256++).

The compiled kernel implements the identical generator in C, so a run is
reproducible bit-for-bit across the two backends. Bounded integers use the
multiply-shift reduction ``(x * n) >> 64``; its bias is O(n / 2**64) and it
needs no rejection loop, which keeps the two implementations in lockstep.
"""

_MASK = 0xFFFFFFFFFFFFFFFF
_DOUBLE_UNIT = 1.0 / (1 << 53)


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31), state


class Xoshiro256:
    """xoshiro256++ seeded through splitmix64, matching the C kernel stream."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed):
        state = seed & _MASK
        self.s0, state = _splitmix64(state)
        self.s1, state = _splitmix64(state)
        self.s2, state = _splitmix64(state)
        self.s3, state = _splitmix64(state)

    def next_u64(self):
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (((((s0 + s3) & _MASK) << 23 | ((s0 + s3) & _MASK) >> 41) & _MASK) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def next_double(self):
        """Uniform double in [0, 1) using the top 53 bits."""
        return (self.next_u64() >> 11) * _DOUBLE_UNIT

    def next_below(self, n):
        """Uniform integer in [0, n) via 128-bit multiply-shift."""
        return (self.next_u64() * n) >> 64
