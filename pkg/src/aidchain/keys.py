"""Signing identities: Ed25519 keys, address derivation, key files.

An actor's address is the first 20 bytes of the Keccak-256 digest of its raw
public key. Key files are JSON, created with 0600 permissions; loading warns
and refuses group/world-readable files.
"""

from __future__ import annotations

import json
import os
import stat
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

from aidchain.errors import BadSignature, UnreadableLocation
from aidchain.keccak import keccak256

SCHEME = "ed25519"

ADDRESS_LEN = 20
SEED_LEN = 32


def derive_address(public_key: bytes) -> bytes:
    """First 20 bytes of keccak256 of the raw public key."""
    return keccak256(public_key)[:ADDRESS_LEN]


def address_to_hex(address: bytes) -> str:
    return "0x" + address.hex()


def parse_address(text: str) -> bytes:
    t = text.lower()
    if not t.startswith("0x") or len(t) != 2 + 2 * ADDRESS_LEN:
        raise ValueError(f"bad address {text!r}: want 0x + 40 hex chars")
    return bytes.fromhex(t[2:])


@dataclass(frozen=True)
class KeyPair:
    seed: bytes
    public_key: bytes

    @classmethod
    def generate(cls) -> "KeyPair":
        return cls.from_seed(os.urandom(SEED_LEN))

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) != SEED_LEN:
            raise ValueError("seed must be 32 bytes")
        sk = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
        pub = sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return cls(seed=seed, public_key=pub)

    @property
    def address(self) -> bytes:
        return derive_address(self.public_key)

    def sign(self, message: bytes) -> bytes:
        sk = ed25519.Ed25519PrivateKey.from_private_bytes(self.seed)
        return sk.sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> None:
    """Raise BadSignature unless ``signature`` verifies."""
    try:
        vk = ed25519.Ed25519PublicKey.from_public_bytes(public_key)
        vk.verify(signature, message)
    except (InvalidSignature, ValueError) as exc:
        raise BadSignature(str(exc) or "signature does not verify") from exc


def save_key_file(path: str, pair: KeyPair, display_name: str = "") -> None:
    payload = {
        "scheme": SCHEME,
        "seed": pair.seed.hex(),
        "public_key": pair.public_key.hex(),
        "address": address_to_hex(pair.address),
        "display_name": display_name,
    }
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_key_file(path: str) -> KeyPair:
    try:
        mode = stat.S_IMODE(os.stat(path).st_mode)
    except OSError as exc:
        raise UnreadableLocation(f"key file {path}: {exc}") from exc
    if mode & 0o077:
        raise UnreadableLocation(
            f"key file {path} is group/world accessible (mode {oct(mode)}); chmod 600 it"
        )
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("scheme") != SCHEME:
        raise UnreadableLocation(f"key file {path}: unsupported scheme {payload.get('scheme')!r}")
    pair = KeyPair.from_seed(bytes.fromhex(payload["seed"]))
    if payload.get("public_key") and payload["public_key"] != pair.public_key.hex():
        raise UnreadableLocation(f"key file {path}: public key does not match seed")
    return pair
