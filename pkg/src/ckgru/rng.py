"""Deterministic random number generation (PCG32).

Every stochastic choice in the toolkit (weight init, dropout masks,
shuffles, synthetic data) goes through :class:`Rng` so that a run is fully
reproduced by its seed on any platform.  The generator is O'Neill's PCG32
with the published multiplier; values can be drawn one at a time or in
vectorized blocks and the two paths advance the state identically.
"""

import numpy as np

_MULT = 6364136223846793005
_MASK64 = (1 << 64) - 1
_DEFAULT_STREAM = 54

# Jump-ahead tables for block generation: after i steps from state s,
# state_i = _POW[i]*s + _GEO[i]*inc (mod 2**64).
_POW = [1]
_GEO = [0]
_POW_NP = np.asarray(_POW, dtype=np.uint64)
_GEO_NP = np.asarray(_GEO, dtype=np.uint64)


def _extend_tables(n):
    global _POW_NP, _GEO_NP
    if len(_POW) <= n:
        while len(_POW) <= n:
            _POW.append((_POW[-1] * _MULT) & _MASK64)
            _GEO.append((_GEO[-1] * _MULT + 1) & _MASK64)
        _POW_NP = np.asarray(_POW, dtype=np.uint64)
        _GEO_NP = np.asarray(_GEO, dtype=np.uint64)


class Rng:
    """PCG32 stream seeded like pcg32_srandom_r(seed, stream)."""

    def __init__(self, seed, stream=_DEFAULT_STREAM):
        self.seed = int(seed) & _MASK64
        self.inc = ((int(stream) << 1) | 1) & _MASK64
        self.state = 0
        self._advance()
        self.state = (self.state + self.seed) & _MASK64
        self._advance()

    def _advance(self):
        self.state = (self.state * _MULT + self.inc) & _MASK64

    def next_u32(self):
        old = self.state
        self._advance()
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & 0xFFFFFFFF

    def next_block(self, n):
        """n raw uint32 draws as an array; same values next_u32 would give."""
        if n <= 0:
            return np.empty(0, dtype=np.uint32)
        _extend_tables(n)
        with np.errstate(over="ignore"):
            states = _POW_NP[:n] * np.uint64(self.state) + _GEO_NP[:n] * np.uint64(self.inc)
            xorshifted = (((states >> np.uint64(18)) ^ states) >> np.uint64(27)).astype(np.uint32)
            rot = (states >> np.uint64(59)).astype(np.uint32)
            out = (xorshifted >> rot) | (xorshifted << ((np.uint32(32) - rot) & np.uint32(31)))
        self.state = (_POW[n] * self.state + _GEO[n] * self.inc) & _MASK64
        return out

    def uniform(self, lo=0.0, hi=1.0):
        return lo + (hi - lo) * (self.next_u32() * 2.0 ** -32)

    def uniform_block(self, n, lo=0.0, hi=1.0):
        return lo + (hi - lo) * (self.next_block(n) * 2.0 ** -32)

    def randbelow(self, bound):
        """Unbiased integer in [0, bound) (rejection sampling)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (1 << 32) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a mutable sequence."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n):
        idx = list(range(n))
        self.shuffle(idx)
        return idx

    def choice(self, items):
        return items[self.randbelow(len(items))]
