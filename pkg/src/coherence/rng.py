"""SplitMix64, the simulator's only source of randomness.

State transition: ``state = (state + 0x9E3779B97F4A7C15) mod 2**64``.
Output function on the new state ``z``::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB  mod 2**64
    out = z ^ (z >> 31)

Floats take the top 53 bits: ``(out >> 11) * 2**-53``, so ``random()`` lies
in [0, 1). Pure integer arithmetic, so streams are identical on every
platform and Python version.

Test vectors (seed -> first outputs):

    0       -> 16294208416658607535, 7960286522194355700, 487617019471545679
    1234567 -> 6457827717110365317, 3203168211198807973, 9817491932198370423
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_TWO_NEG_53 = 1.0 / (1 << 53)


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * _TWO_NEG_53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by floor(u * n); bias is below 2**-53 * n."""
        if n <= 0:
            raise ValueError("n must be positive")
        return int(self.random() * n)

    def shuffle(self, items: list) -> None:
        # Fisher-Yates, in place
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, stream: int) -> int:
    """Independent sub-stream seed, e.g. for bus duplication vs. agent actions."""
    return SplitMix64(seed ^ ((stream * GOLDEN_GAMMA) & MASK64)).next_u64()
