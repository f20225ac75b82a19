# cython: language_level=3
"""Compiled hot kernels: splitmix64, CRC-32, FNV-1a-64 and the frame keystream."""
from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_FromStringAndSize
from libc.stdint cimport uint64_t, uint32_t, uint8_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t FNV_OFFSET_C = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME_C = 0x00000100000001B3ULL

cdef uint32_t CRC_TABLE[256]


cdef void _init_table():
    cdef uint32_t c
    cdef int n, k
    for n in range(256):
        c = <uint32_t>n
        for k in range(8):
            if c & 1:
                c = 0xEDB88320U ^ (c >> 1)
            else:
                c = c >> 1
        CRC_TABLE[n] = c

_init_table()

FNV_OFFSET = FNV_OFFSET_C


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cpdef uint64_t mix64(uint64_t z):
    return _mix(z)


def splitmix_next(uint64_t state):
    state = state + GOLDEN
    return _mix(state), state


cpdef uint64_t prf64(uint64_t key, uint64_t nonce, uint64_t index):
    return _mix(key ^ nonce ^ (index * GOLDEN))


cdef inline bytes _as_bytes(data):
    # a pointer into an immutable bytes object avoids the memoryview setup cost
    return data if type(data) is bytes else bytes(data)


def crc32(data):
    cdef bytes b = _as_bytes(data)
    cdef const unsigned char* p = b
    cdef Py_ssize_t i, n = len(b)
    cdef uint32_t c = 0xFFFFFFFFU
    for i in range(n):
        c = CRC_TABLE[(c ^ p[i]) & 0xFF] ^ (c >> 8)
    return c ^ 0xFFFFFFFFU


def fnv1a64(data, uint64_t h=FNV_OFFSET_C):
    cdef bytes b = _as_bytes(data)
    cdef const unsigned char* p = b
    cdef Py_ssize_t i, n = len(b)
    for i in range(n):
        h = (h ^ p[i]) * FNV_PRIME_C
    return h


def keystream_xor(data, uint64_t key, uint64_t nonce):
    cdef bytes b = _as_bytes(data)
    cdef const unsigned char* p = b
    cdef Py_ssize_t j, n = len(b)
    cdef uint64_t block = 0
    if n == 0:
        return b""
    cdef bytes out = PyBytes_FromStringAndSize(NULL, n)
    cdef unsigned char* o = <unsigned char*>PyBytes_AS_STRING(out)
    for j in range(n):
        if (j & 7) == 0:
            block = _mix(key ^ nonce ^ (<uint64_t>(j >> 3) * GOLDEN))
        o[j] = p[j] ^ <uint8_t>((block >> (8 * (j & 7))) & 0xFF)
    return out
