"""Deterministic pseudo-random primitives shared by every subsystem.

Everything that needs randomness (port labelings, activation policies,
per-agent coin streams) goes through splitmix64 so that runs replay
bit-identically and the compiled kernel can mirror the exact same stream
with a few lines of C.
"""

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 scramble step. Input and output are uint64."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix2(a: int, b: int) -> int:
    """Combine two uint64 values into one well-scrambled uint64."""
    return splitmix64((splitmix64(a & MASK64) ^ (b & MASK64)) & MASK64)


class Stream:
    """A counted splitmix64 stream: word(i) is a pure function of (seed, i)."""

    __slots__ = ("seed", "count")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.count = 0

    def next_word(self) -> int:
        w = splitmix64((self.seed + 0x632BE59BD9B4E019 * (self.count + 1)) & MASK64)
        self.count += 1
        return w

    def clone(self) -> "Stream":
        s = Stream(self.seed)
        s.count = self.count
        return s
