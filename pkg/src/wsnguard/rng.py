"""Seeded splitmix64 streams.

Every random decision in a run draws from a stream forked off the master
seed with a fixed label, so unrelated subsystems never perturb each other.
"""
from __future__ import annotations

from .kernels import MASK64, mix64, splitmix_next

_INV_2_53 = 1.0 / (1 << 53)


def rng_next(state: int) -> tuple[int, int]:
    """Return ``(value, next_state)`` for a raw splitmix64 state."""
    return splitmix_next(state & MASK64)


def fork_stream(state: int, label: int) -> int:
    """Derive a child state from ``state`` and ``label`` without advancing the parent."""
    return mix64((state ^ label) & MASK64)


def label_of(*parts: int) -> int:
    """Pack small integers into a 64-bit stream label."""
    h = 0
    for p in parts:
        h = mix64((h ^ (p & MASK64)) & MASK64)
    return h


class Rng:
    """Mutable wrapper around a splitmix64 state."""

    __slots__ = ("state",)

    def __init__(self, state: int) -> None:
        self.state = state & MASK64

    def next_u64(self) -> int:
        value, self.state = splitmix_next(self.state)
        return value

    def random(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def bernoulli(self, p: float) -> bool:
        # always consumes one draw so stream position is independent of p
        return self.random() < p

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def fork(self, label: int) -> "Rng":
        return Rng(fork_stream(self.state, label))

    def bytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += self.next_u64().to_bytes(8, "little")
        return bytes(out[:n])
