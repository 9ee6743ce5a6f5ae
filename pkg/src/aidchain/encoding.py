"""Canonical binary encoding for everything that gets hashed or persisted.

Layout rules (fixed, shared with any other implementation of the wire
format): integers are big-endian fixed-width; variable-length byte fields
carry a 4-byte big-endian length prefix; addresses are 20 raw bytes and
digests 32 raw bytes with no prefix; maps are encoded as entry lists sorted
bytewise by key. Encoding is injective: equal bytes mean equal values.

Decoding is strict: every length is bounds-checked and a decoder consuming
a record must consume it exactly.
"""

from __future__ import annotations

import struct

from aidchain.contract import CallKind, ContractCall, ContractState
from aidchain.errors import DecodeError

ADDRESS_LEN = 20
DIGEST_LEN = 32
MAX_FIELD_LEN = 1 << 24  # sanity cap for length prefixes


def encode_u8(v: int) -> bytes:
    return struct.pack(">B", v)


def encode_u32(v: int) -> bytes:
    return struct.pack(">I", v)


def encode_u64(v: int) -> bytes:
    return struct.pack(">Q", v)


def encode_bytes(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def encode_str(s: str) -> bytes:
    return encode_bytes(s.encode("utf-8"))


class Reader:
    """Strict cursor over one record's bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError(f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def var_bytes(self) -> bytes:
        n = self.u32()
        if n > MAX_FIELD_LEN:
            raise DecodeError(f"length prefix {n} exceeds cap at offset {self.pos - 4}")
        return self.take(n)

    def var_str(self) -> str:
        raw = self.var_bytes()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"invalid UTF-8 at offset {self.pos}: {exc}") from exc

    def address(self) -> bytes:
        return self.take(ADDRESS_LEN)

    def digest(self) -> bytes:
        return self.take(DIGEST_LEN)

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes after offset {self.pos}")


# ---- contract calls ------------------------------------------------------


def encode_call(call: ContractCall) -> bytes:
    """Kind tag byte followed by the kind's fields in declaration order."""
    kind = CallKind(call.kind)
    out = [encode_u8(kind.value)]
    if kind in (CallKind.ADD_RECIPIENT, CallKind.REMOVE_RECIPIENT):
        out.append(call.recipient)
    elif kind == CallKind.SEND_ALLOWANCE:
        out.append(call.recipient)
        out.append(encode_u64(call.amount))
    elif kind == CallKind.ADD_FUNDS:
        out.append(encode_u64(call.amount))
    elif kind == CallKind.REGISTER_BANK_ACCOUNT:
        out.append(call.recipient)
        out.append(encode_str(call.account))
    return b"".join(out)


def decode_call(r: Reader) -> ContractCall:
    tag = r.u8()
    try:
        kind = CallKind(tag)
    except ValueError:
        raise DecodeError(f"unknown call tag {tag}") from None
    if kind in (CallKind.ADD_RECIPIENT, CallKind.REMOVE_RECIPIENT):
        return ContractCall(kind=kind, recipient=r.address())
    if kind == CallKind.SEND_ALLOWANCE:
        return ContractCall(kind=kind, recipient=r.address(), amount=r.u64())
    if kind == CallKind.ADD_FUNDS:
        return ContractCall(kind=kind, amount=r.u64())
    if kind == CallKind.GET_BALANCE:
        return ContractCall(kind=kind)
    return ContractCall(kind=kind, recipient=r.address(), account=r.var_str())


# ---- contract state ------------------------------------------------------


def encode_state(state: ContractState) -> bytes:
    out = [state.organization]
    out.append(encode_u32(len(state.recipients)))
    for addr in sorted(state.recipients):
        out.append(addr)
        out.append(encode_u8(1))
    out.append(encode_u32(len(state.balances)))
    for addr in sorted(state.balances):
        out.append(addr)
        out.append(encode_u64(state.balances[addr]))
    out.append(encode_u32(len(state.bank_accounts)))
    for addr in sorted(state.bank_accounts):
        out.append(addr)
        out.append(state.bank_accounts[addr])
    return b"".join(out)


def decode_state(r: Reader) -> ContractState:
    organization = r.address()
    recipients = {}
    for _ in range(r.u32()):
        addr = r.address()
        flag = r.u8()
        if flag != 1:
            raise DecodeError("recipient entries must carry flag 1")
        recipients[addr] = True
    balances = {}
    for _ in range(r.u32()):
        addr = r.address()
        balances[addr] = r.u64()
    bank_accounts = {}
    for _ in range(r.u32()):
        addr = r.address()
        bank_accounts[addr] = r.digest()
    return ContractState(organization, recipients, balances, bank_accounts)


# ---- hex rendering -------------------------------------------------------


def digest_to_hex(digest: bytes) -> str:
    return digest.hex()


def parse_digest(text: str) -> bytes:
    t = text.lower().removeprefix("0x")
    if len(t) != 2 * DIGEST_LEN:
        raise ValueError(f"bad digest {text!r}: want 64 hex chars")
    return bytes.fromhex(t)
