"""Deterministic 64-bit PRNG for reproducible corpora.

SplitMix64 (Steele, Lea & Flood's mixer, as used by java.util.SplitmixRandom
and the xoshiro seeding routine). Pure integer arithmetic, so the stream is
identical on every platform and Python version; that is the whole point of
not using ``random.Random`` here.
"""

from dataclasses import dataclass

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Mix ``seed`` with integer keys into a new 64-bit seed.

    Used to give every track / resample / preset draw its own substream.
    """
    state = seed & _MASK64
    for key in keys:
        state = _mix((state + _GOLDEN) & _MASK64)
        state = _mix((state ^ (key & _MASK64)) + _GOLDEN & _MASK64)
    return state


@dataclass
class SplitMix64:
    """Sequential SplitMix64 stream."""

    state: int

    def __post_init__(self) -> None:
        self.state &= _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix(self.state)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        if n == 1:
            return 0
        # Reject draws from the incomplete top interval.
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % n

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def choice(self, seq):
        if not seq:
            raise ValueError("choice() on empty sequence")
        return seq[self.randbelow(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
