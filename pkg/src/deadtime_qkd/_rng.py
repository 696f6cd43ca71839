"""xoshiro256** seeded through splitmix64, in plain Python.

Bit-identical to the generator compiled into ``_kernel.pyx``.  Draws are
compared against integer thresholds on their top 53 bits, so acceptance
decisions never depend on floating-point rounding.
"""

MASK64 = (1 << 64) - 1
GENERATOR_ID = "xoshiro256**-1.0/splitmix64"
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_state(seed: int) -> list[int]:
    x = seed & MASK64
    state = []
    for _ in range(4):
        x = (x + GOLDEN_GAMMA) & MASK64
        state.append(splitmix64_mix(x))
    return state


def derive_seed(master: int, index: int) -> int:
    """Seed for sweep cell ``index``: ``splitmix64(master + gamma * (index + 1))``."""
    return splitmix64_mix((master & MASK64) + GOLDEN_GAMMA * (index + 1))


def probability_threshold(prob: float) -> int:
    """53-bit integer threshold so that ``(draw >> 11) < threshold`` has probability ``prob``."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"probability out of range: {prob!r}")
    return int(prob * (1 << 53))


class Xoshiro256:
    __slots__ = ("s",)

    def __init__(self, seed: int):
        self.s = seed_state(seed)

    def next(self) -> int:
        s = self.s
        result = (((s[1] * 5) & MASK64) << 7 | ((s[1] * 5) & MASK64) >> 57) & MASK64
        result = (result * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = ((s[3] << 45) | (s[3] >> 19)) & MASK64
        return result
