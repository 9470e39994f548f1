"""Keyed counter-based random streams.

Every random decision in the package goes through :func:`keyed_rng`. A tuple
of integers is folded into a 128-bit Philox key with the splitmix64 finalizer:

    h0 = 0x6A09E667F3BCC909, h1 = 0xBB67AE8584CAA73B
    for x in ints:  h0 = mix(h0 ^ x);  h1 = mix(h1 + x + h0)
    key = (h1 << 64) | h0

where ``mix`` is splitmix64 (add 0x9E3779B97F4A7C15, then two xor-shift-
multiply rounds) and all arithmetic is modulo 2**64. Philox is a counter-based
generator, so a stream is fully determined by its key and the number of draws
taken from it, on every platform.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fold_key(*ints: int) -> int:
    h0 = 0x6A09E667F3BCC909
    h1 = 0xBB67AE8584CAA73B
    for x in ints:
        x = int(x) & MASK64
        h0 = splitmix64(h0 ^ x)
        h1 = splitmix64((h1 + x + h0) & MASK64)
    return (h1 << 64) | h0


def keyed_rng(*ints: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=fold_key(*ints)))


def string_code(name: str) -> int:
    """Stable 64-bit code for a short identifier (FNV-1a)."""
    h = 0xCBF29CE484222325
    for b in name.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h
