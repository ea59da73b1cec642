"""Seed mixing and counter-based random streams.

Every random quantity in the laboratory is drawn from a Philox4x64 stream
(numpy's counter-based generator) whose 64-bit key is derived from the
master seed and the coordinates of the draw with the SplitMix64 finalizer.
Streams therefore depend only on (seed, coordinates), never on worker count
or scheduling order.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# Sub-stream tags, mixed into an instance seed.
WEIGHT_STREAM = 0
LINK_STREAM = 1
BOOTSTRAP_STREAM = 2


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance by the golden gamma and finalize.

    Args:
        x: Any integer, reduced modulo 2**64.

    Returns:
        A well-mixed unsigned 64-bit integer.
    """
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(*values: int) -> int:
    """Fold integers into one 64-bit seed, order-sensitive."""
    h = 0
    for value in values:
        h = splitmix64(h ^ (int(value) & MASK64))
    return h


def stream(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & MASK64))


def uniform_open_closed(generator: np.random.Generator, size: int) -> np.ndarray:
    """Uniform doubles on (0, 1] with 53 random bits each.

    The raw 64-bit output is cut to its top 53 bits k, mapped to (k + 1) / 2**53,
    so 0 can never occur and -log(u) stays finite.
    """
    raw = generator.bit_generator.random_raw(size)
    top = np.right_shift(np.asarray(raw, dtype=np.uint64), np.uint64(11))
    return (top.astype(np.float64) + 1.0) * (1.0 / (1 << 53))
