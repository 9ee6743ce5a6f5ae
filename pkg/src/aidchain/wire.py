"""JSON wire formats shared by the HTTP API, the client and the CLI.

Amounts travel as decimal strings, addresses as 0x-prefixed lowercase hex,
digests as bare lowercase hex. Signed requests authenticate with the
X-AN-Sender / X-AN-Nonce / X-AN-Signature headers; the signature covers
method, path, nonce and body.
"""

from __future__ import annotations

from typing import Optional

from aidchain.chain import Block, Transaction, Vote
from aidchain.contract import (
    CALL_KINDS_BY_NAME,
    CALL_KIND_NAMES,
    CallKind,
    ContractCall,
    EventRecord,
)
from aidchain.errors import BadFilter, DecodeError
from aidchain.keys import address_to_hex, parse_address

SENDER_HEADER = "X-AN-Sender"
NONCE_HEADER = "X-AN-Nonce"
SIGNATURE_HEADER = "X-AN-Signature"

ROLES = ("organization", "recipient", "observer")


def canonical_request_bytes(method: str, path: str, nonce: int, body: bytes) -> bytes:
    """Bytes covered by a request signature: method, path, nonce, body."""
    return f"{method.upper()}\n{path}\n{nonce}\n".encode("utf-8") + body


def parse_amount(text) -> int:
    if isinstance(text, int):
        value = text
    else:
        try:
            value = int(str(text), 10)
        except ValueError as exc:
            raise DecodeError(f"bad amount {text!r}") from exc
    if not 0 <= value < 2**64:
        raise DecodeError(f"amount {value} outside unsigned 64-bit range")
    return value


def call_to_json(call: ContractCall) -> dict:
    payload = {"kind": CALL_KIND_NAMES[CallKind(call.kind)]}
    if call.recipient is not None:
        payload["recipient"] = address_to_hex(call.recipient)
    if call.amount is not None:
        payload["amount"] = str(call.amount)
    if call.account is not None:
        payload["account"] = call.account
    return payload


def call_from_json(payload: dict) -> ContractCall:
    if not isinstance(payload, dict):
        raise DecodeError("call must be an object")
    kind = CALL_KINDS_BY_NAME.get(payload.get("kind"))
    if kind is None:
        raise DecodeError(f"unknown call kind {payload.get('kind')!r}")
    recipient = payload.get("recipient")
    amount = payload.get("amount")
    account = payload.get("account")
    return ContractCall(
        kind=kind,
        recipient=parse_address(recipient) if recipient is not None else None,
        amount=parse_amount(amount) if amount is not None else None,
        account=account,
    )


def tx_to_json(tx: Transaction, height: Optional[int] = None,
               index: Optional[int] = None) -> dict:
    payload = {
        "sender": address_to_hex(tx.sender),
        "nonce": str(tx.nonce),
        "call": call_to_json(tx.call),
        "signature": tx.signature.hex(),
        "hash": tx.hash.hex(),
    }
    if height is not None:
        payload["height"] = height
        payload["index"] = index
    return payload


def tx_from_json(payload: dict) -> Transaction:
    if not isinstance(payload, dict):
        raise DecodeError("transaction must be an object")
    try:
        sender = parse_address(payload["sender"])
        nonce = parse_amount(payload["nonce"])
        call = call_from_json(payload["call"])
        signature = bytes.fromhex(payload["signature"])
    except (KeyError, ValueError, TypeError) as exc:
        raise DecodeError(f"bad transaction payload: {exc}") from exc
    from aidchain.chain import tx_signing_bytes
    from aidchain.encoding import encode_bytes
    from aidchain.keccak import keccak256

    full = tx_signing_bytes(sender, nonce, call) + encode_bytes(signature)
    return Transaction(sender, nonce, call, signature, keccak256(full))


def event_to_json(event: EventRecord, height: int) -> dict:
    payload = {
        "kind": event.kind,
        "actor": address_to_hex(event.actor),
        "subject": address_to_hex(event.subject),
        "amount": str(event.amount),
        "tx_hash": event.tx_hash.hex(),
        "height": height,
    }
    if event.account_digest is not None:
        payload["account_digest"] = event.account_digest.hex()
    return payload


def vote_to_json(vote: Vote) -> dict:
    return {"voter": vote.voter, "round": vote.round, "signature": vote.signature.hex()}


def block_to_json(block: Block) -> dict:
    return {
        "height": block.height,
        "hash": block.hash.hex(),
        "parent_hash": block.parent_hash.hex(),
        "proposer": block.proposer,
        "state_root": block.state_root.hex(),
        "transactions": [tx_to_json(tx) for tx in block.transactions],
        "votes": [vote_to_json(v) for v in block.votes],
    }


def parse_event_filters(query: dict) -> dict:
    """Validate ?kind=&address=&from=&to= filters; conjunctive."""
    filters = {}
    kind = query.get("kind")
    if kind:
        from aidchain.contract import EVENT_KINDS

        if kind not in EVENT_KINDS:
            raise BadFilter(f"unknown event kind {kind!r}")
        filters["kind"] = kind
    address = query.get("address")
    if address:
        try:
            filters["address"] = parse_address(address)
        except ValueError as exc:
            raise BadFilter(str(exc)) from exc
    for name, key in (("from", "from_height"), ("to", "to_height")):
        raw = query.get(name)
        if raw:
            try:
                filters[key] = int(raw)
            except ValueError as exc:
                raise BadFilter(f"bad {name} height {raw!r}") from exc
    return filters
