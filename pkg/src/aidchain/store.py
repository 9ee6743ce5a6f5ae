"""Append-only chain store.

One file, a sequence of length-prefixed records: 4-byte big-endian length,
then the record payload. The first record is the canonical genesis
parameters; every following record is a canonical block, starting with the
genesis block at height 0.

Two read modes: tolerant (node startup) detects a torn trailing record,
truncates it away and reports a warning; strict (audit / chain-verify)
refuses any irregularity with a located error.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Optional

from aidchain.errors import CorruptStore, UnreadableLocation

MAX_RECORD_LEN = 1 << 26  # 64 MiB; desk-scale blocks are far smaller


@dataclass
class LoadResult:
    genesis_params: bytes
    block_payloads: list
    warning: Optional[str] = None


class ChainStore:
    """Owns the chain file; appends are flushed and fsynced before returning."""

    def __init__(self, path: str):
        self.path = path

    def exists(self) -> bool:
        return os.path.exists(self.path)

    def initialize(self, genesis_params: bytes, genesis_block: bytes) -> None:
        if self.exists() and os.path.getsize(self.path) > 0:
            raise CorruptStore(f"{self.path} already exists; refusing to overwrite")
        os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
        with open(self.path, "wb") as fh:
            fh.write(_frame(genesis_params))
            fh.write(_frame(genesis_block))
            fh.flush()
            os.fsync(fh.fileno())

    def append_record(self, payload: bytes) -> None:
        with open(self.path, "ab") as fh:
            fh.write(_frame(payload))
            fh.flush()
            os.fsync(fh.fileno())

    def load(self, strict: bool = False) -> LoadResult:
        """Read all records; see module docstring for the two modes."""
        try:
            with open(self.path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise UnreadableLocation(f"{self.path}: {exc}") from exc
        if not data:
            raise CorruptStore(f"{self.path} is empty; genesis must be explicit")

        records = []
        offset = 0
        warning = None
        while offset < len(data):
            if offset + 4 > len(data):
                warning = _torn(self.path, offset, len(data) - offset, strict)
                break
            (length,) = struct.unpack(">I", data[offset:offset + 4])
            if length > MAX_RECORD_LEN:
                raise CorruptStore(
                    f"{self.path}: record length {length} at offset {offset} exceeds cap"
                )
            if offset + 4 + length > len(data):
                warning = _torn(self.path, offset, len(data) - offset, strict)
                break
            records.append(data[offset + 4:offset + 4 + length])
            offset += 4 + length

        if warning is not None:
            # drop the partial tail so future appends write a clean record
            with open(self.path, "r+b") as fh:
                fh.truncate(offset)
                fh.flush()
                os.fsync(fh.fileno())

        if len(records) < 2:
            raise CorruptStore(
                f"{self.path}: found {len(records)} records, need genesis parameters "
                "and the genesis block"
            )
        return LoadResult(records[0], records[1:], warning)


def _frame(payload: bytes) -> bytes:
    return struct.pack(">I", len(payload)) + payload


def _torn(path: str, offset: int, remaining: int, strict: bool) -> str:
    message = f"{path}: partial record at offset {offset} ({remaining} trailing bytes)"
    if strict:
        raise CorruptStore(message)
    return message
