"""Small shared numeric helpers: factorials, log-binomials, seed mixing."""

from __future__ import annotations

import math

__all__ = [
    "MAX_ORDER",
    "factorial",
    "log_binomial",
    "binomial",
    "splitmix64",
    "seed_stream",
]

# Interaction orders above this are refused outright: (k!)^8 factors in the
# sample-size law overflow float64 shortly beyond it, and no experiment at
# this scale is meaningful anyway.
MAX_ORDER = 20

_MASK64 = (1 << 64) - 1


def factorial(k: int) -> float:
    """k! as a float, guarded by the package-wide order cap."""
    if not isinstance(k, int) or k < 0:
        raise ValueError(f"factorial expects a nonnegative int, got {k!r}")
    if k > MAX_ORDER:
        raise ValueError(f"interaction order {k} exceeds the cap {MAX_ORDER}")
    return float(math.factorial(k))


def log_binomial(n: int, k: int) -> float:
    """log C(n, k) via lgamma, exact enough for sample-size laws."""
    if k < 0 or n < 0 or k > n:
        raise ValueError(f"log_binomial undefined for n={n}, k={k}")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def binomial(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        raise ValueError(f"binomial undefined for n={n}, k={k}")
    return math.comb(n, k)


def splitmix64(x: int) -> int:
    """One splitmix64 output step for the 64-bit input ``x``.

    Used to derive independent child seeds from (base seed, grid index,
    trial index) triples; the constants are the standard ones.
    """
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def seed_stream(seed: int, count: int) -> list[int]:
    """``count`` successive splitmix64 outputs starting from ``seed``."""
    out = []
    state = seed & _MASK64
    for _ in range(count):
        state = splitmix64(state)
        out.append(state)
    return out
