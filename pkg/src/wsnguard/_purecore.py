"""Pure-Python implementations of the hot kernels.

Used when the compiled ``_fastcore`` extension is unavailable or when
``WSNGUARD_PURE=1`` is set. Behaviour is bit-identical to the extension.
"""
from __future__ import annotations

import zlib

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x00000100000001B3


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix_next(state: int) -> tuple[int, int]:
    state = (state + GOLDEN) & MASK64
    return mix64(state), state


def prf64(key: int, nonce: int, index: int) -> int:
    return mix64(key ^ nonce ^ ((index * GOLDEN) & MASK64))


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def keystream_xor(data: bytes, key: int, nonce: int) -> bytes:
    n = len(data)
    if n == 0:
        return b""
    blocks = (n + 7) // 8
    stream = b"".join(prf64(key, nonce, i).to_bytes(8, "little") for i in range(blocks))
    x = int.from_bytes(data, "little") ^ int.from_bytes(stream[:n], "little")
    return x.to_bytes(n, "little")
