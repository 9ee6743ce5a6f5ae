# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Keccak-256 kernel (original padding, as used on Ethereum).

Hot path for transaction hashing, block hashing and state roots; the
pure-Python twin lives in ``_keccak_py``. Assumes a little-endian host
(lane absorption copies raw bytes); the pure fallback covers the rest.
"""

from libc.stdint cimport uint64_t
from libc.string cimport memcpy, memset

cdef uint64_t[24] ROUND_CONSTANTS
ROUND_CONSTANTS = [
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808AULL,
    0x8000000080008000ULL, 0x000000000000808BULL, 0x0000000080000001ULL,
    0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008AULL,
    0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000AULL,
    0x000000008000808BULL, 0x800000000000008BULL, 0x8000000000008089ULL,
    0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
    0x000000000000800AULL, 0x800000008000000AULL, 0x8000000080008081ULL,
    0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL,
]

cdef int[25] ROTATIONS
ROTATIONS = [
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
]

DEF RATE = 136


cdef inline uint64_t rotl(uint64_t v, int n) nogil:
    return (v << n) | (v >> ((64 - n) & 63))


cdef void keccak_f1600(uint64_t *lanes) nogil:
    cdef uint64_t[5] c
    cdef uint64_t[5] d
    cdef uint64_t[25] b
    cdef int rnd, x, y, i

    for rnd in range(24):
        # theta
        for x in range(5):
            c[x] = lanes[x] ^ lanes[x + 5] ^ lanes[x + 10] ^ lanes[x + 15] ^ lanes[x + 20]
        for x in range(5):
            d[x] = c[(x + 4) % 5] ^ rotl(c[(x + 1) % 5], 1)
        for i in range(25):
            lanes[i] ^= d[i % 5]
        # rho + pi
        for x in range(5):
            for y in range(5):
                b[y + 5 * ((2 * x + 3 * y) % 5)] = rotl(lanes[x + 5 * y], ROTATIONS[x + 5 * y])
        # chi
        for y in range(5):
            for x in range(5):
                lanes[x + 5 * y] = b[x + 5 * y] ^ ((~b[(x + 1) % 5 + 5 * y]) & b[(x + 2) % 5 + 5 * y])
        # iota
        lanes[0] ^= ROUND_CONSTANTS[rnd]


def keccak256(data: bytes) -> bytes:
    """Keccak-256 digest of ``data`` (32 bytes)."""
    cdef uint64_t[25] lanes
    cdef uint64_t[17] block  # aligned staging buffer for one rate-sized chunk
    cdef const unsigned char *buf = data
    cdef unsigned char *pad = <unsigned char *> block
    cdef Py_ssize_t length = len(data)
    cdef Py_ssize_t offset = 0
    cdef Py_ssize_t tail
    cdef int i

    memset(<void *> lanes, 0, sizeof(lanes))

    with nogil:
        while length - offset >= RATE:
            memcpy(<void *> block, buf + offset, RATE)
            for i in range(17):
                lanes[i] ^= block[i]
            keccak_f1600(lanes)
            offset += RATE

        tail = length - offset
        memset(<void *> block, 0, RATE)
        if tail > 0:
            memcpy(<void *> block, buf + offset, tail)
        pad[tail] = 0x01
        pad[RATE - 1] ^= 0x80
        for i in range(17):
            lanes[i] ^= block[i]
        keccak_f1600(lanes)

    return (<unsigned char *> lanes)[:32]
