"""Pure-Python Keccak-256 (original padding, as used on Ethereum).

This is the fallback for the compiled kernel in ``_keccak_c``; both produce
the pre-standardization Keccak digest (pad byte 0x01), not NIST SHA3-256
(pad byte 0x06).
"""

_MASK = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# Rotation offsets, lane index = x + 5*y.
_ROTATIONS = (
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
)

_RATE = 136  # bytes; 1088-bit rate / 512-bit capacity


def _keccak_f1600(lanes):
    for rc in _ROUND_CONSTANTS:
        # theta
        c = [lanes[x] ^ lanes[x + 5] ^ lanes[x + 10] ^ lanes[x + 15] ^ lanes[x + 20]
             for x in range(5)]
        d = [c[(x - 1) % 5] ^ (((c[(x + 1) % 5] << 1) | (c[(x + 1) % 5] >> 63)) & _MASK)
             for x in range(5)]
        lanes = [lanes[i] ^ d[i % 5] for i in range(25)]
        # rho + pi
        b = [0] * 25
        for x in range(5):
            for y in range(5):
                r = _ROTATIONS[x + 5 * y]
                v = lanes[x + 5 * y]
                b[y + 5 * ((2 * x + 3 * y) % 5)] = ((v << r) | (v >> (64 - r))) & _MASK if r else v
        # chi
        lanes = [b[i] ^ ((~b[(i + 1) % 5 + 5 * (i // 5)]) & b[(i + 2) % 5 + 5 * (i // 5)] & _MASK)
                 for i in range(25)]
        # iota
        lanes[0] ^= rc
    return lanes


def keccak256(data: bytes) -> bytes:
    """Keccak-256 digest of ``data`` (32 bytes)."""
    lanes = [0] * 25

    # absorb full rate blocks
    offset = 0
    length = len(data)
    while length - offset >= _RATE:
        block = data[offset:offset + _RATE]
        for i in range(17):
            lanes[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        lanes = _keccak_f1600(lanes)
        offset += _RATE

    # pad10*1 with Keccak domain byte 0x01 and absorb the final block
    block = bytearray(data[offset:])
    block.append(0x01)
    block.extend(b"\x00" * (_RATE - len(block)))
    block[-1] ^= 0x80
    for i in range(17):
        lanes[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
    lanes = _keccak_f1600(lanes)

    return b"".join(lanes[i].to_bytes(8, "little") for i in range(4))
