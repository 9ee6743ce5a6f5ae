"""Deterministic allowance-distribution contract.

Pure state-transition functions: every operation takes a state and returns a
new one, never mutating its input. Errors raise before any copy is visible,
so a caught exception always leaves the caller holding the untouched input
state (all-or-nothing semantics).

Semantics in brief: a single organization address, fixed at genesis, manages
a set of authorized recipients, moves funds from its own balance to theirs,
and registers hashed (never plaintext) bank-account commitments. Successful
SendAllowance / AddFunds / RegisterBankAccount each emit exactly one audit
event; recipient management emits none.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from aidchain.errors import (
    AccountTooLong,
    EmptyAccount,
    InsufficientFunds,
    MalformedCall,
    NotARecipient,
    Overflow,
    Unauthorized,
    ZeroAmount,
)
from aidchain.keccak import ZERO_DIGEST, keccak256

MAX_AMOUNT = 2**64 - 1
MAX_ACCOUNT_BYTES = 256


class CallKind(IntEnum):
    """Contract operations; values double as canonical wire tags."""

    ADD_RECIPIENT = 1
    REMOVE_RECIPIENT = 2
    SEND_ALLOWANCE = 3
    ADD_FUNDS = 4
    GET_BALANCE = 5
    REGISTER_BANK_ACCOUNT = 6


# wire names used in JSON bodies and CLI output
CALL_KIND_NAMES = {
    CallKind.ADD_RECIPIENT: "add_recipient",
    CallKind.REMOVE_RECIPIENT: "remove_recipient",
    CallKind.SEND_ALLOWANCE: "send_allowance",
    CallKind.ADD_FUNDS: "add_funds",
    CallKind.GET_BALANCE: "get_balance",
    CallKind.REGISTER_BANK_ACCOUNT: "register_bank_account",
}
CALL_KINDS_BY_NAME = {v: k for k, v in CALL_KIND_NAMES.items()}

EVENT_ALLOWANCE_SENT = "AllowanceSent"
EVENT_FUNDS_ADDED = "FundsAdded"
EVENT_BANK_ACCOUNT_REGISTERED = "BankAccountRegistered"
EVENT_KINDS = (EVENT_ALLOWANCE_SENT, EVENT_FUNDS_ADDED, EVENT_BANK_ACCOUNT_REGISTERED)


@dataclass(frozen=True)
class ContractCall:
    kind: CallKind
    recipient: Optional[bytes] = None
    amount: Optional[int] = None
    account: Optional[str] = None


@dataclass(frozen=True)
class EventRecord:
    kind: str
    actor: bytes
    subject: bytes
    amount: int
    account_digest: Optional[bytes] = None
    tx_hash: bytes = ZERO_DIGEST


@dataclass(frozen=True)
class ContractState:
    """Full contract state.

    Maps are kept normalized: only flag-true recipients, non-zero balances
    and registered digests are stored, so absent keys mean false / 0 / none
    and structural equality coincides with semantic equality.
    """

    organization: bytes
    recipients: dict = field(default_factory=dict)
    balances: dict = field(default_factory=dict)
    bank_accounts: dict = field(default_factory=dict)

    def is_recipient(self, address: bytes) -> bool:
        return self.recipients.get(address, False)

    def balance_of(self, address: bytes) -> int:
        return self.balances.get(address, 0)

    def account_digest_of(self, address: bytes) -> Optional[bytes]:
        return self.bank_accounts.get(address)


def init(organization: bytes) -> ContractState:
    """Genesis state: the deploying address becomes the organization."""
    return ContractState(organization=organization)


def _require_organization(state: ContractState, caller: bytes) -> None:
    if caller != state.organization:
        raise Unauthorized("caller is not the organization")


def add_recipient(state: ContractState, caller: bytes, recipient: bytes) -> ContractState:
    _require_organization(state, caller)
    if state.recipients.get(recipient):
        return state
    recipients = dict(state.recipients)
    recipients[recipient] = True
    return ContractState(state.organization, recipients, state.balances, state.bank_accounts)


def remove_recipient(state: ContractState, caller: bytes, recipient: bytes) -> ContractState:
    """Clears the authorization flag; balance and account digest persist."""
    _require_organization(state, caller)
    if recipient not in state.recipients:
        return state
    recipients = dict(state.recipients)
    del recipients[recipient]
    return ContractState(state.organization, recipients, state.balances, state.bank_accounts)


def send_allowance(
    state: ContractState, caller: bytes, recipient: bytes, amount: int
) -> tuple[ContractState, EventRecord]:
    _require_organization(state, caller)
    if not state.is_recipient(recipient):
        raise NotARecipient(f"{recipient.hex()} is not an authorized recipient")
    if amount == 0:
        raise ZeroAmount("allowance amount must be positive")
    org_balance = state.balance_of(state.organization)
    if org_balance < amount:
        raise InsufficientFunds(f"organization holds {org_balance}, needs {amount}")

    balances = dict(state.balances)
    new_org = org_balance - amount
    if new_org:
        balances[state.organization] = new_org
    else:
        balances.pop(state.organization, None)
    # credit reads the debited map so a self-transfer conserves value
    balances[recipient] = balances.get(recipient, 0) + amount

    event = EventRecord(
        kind=EVENT_ALLOWANCE_SENT, actor=caller, subject=recipient, amount=amount
    )
    return (
        ContractState(state.organization, state.recipients, balances, state.bank_accounts),
        event,
    )


def add_funds(
    state: ContractState, caller: bytes, amount: int
) -> tuple[ContractState, EventRecord]:
    _require_organization(state, caller)
    if amount == 0:
        raise ZeroAmount("added amount must be positive")
    org_balance = state.balance_of(state.organization)
    if org_balance + amount > MAX_AMOUNT:
        raise Overflow(f"organization balance {org_balance} + {amount} exceeds 2^64-1")

    balances = dict(state.balances)
    balances[state.organization] = org_balance + amount
    event = EventRecord(kind=EVENT_FUNDS_ADDED, actor=caller, subject=caller, amount=amount)
    return (
        ContractState(state.organization, state.recipients, balances, state.bank_accounts),
        event,
    )


def get_balance(state: ContractState, caller: bytes) -> int:
    return state.balance_of(caller)


def register_bank_account(
    state: ContractState, caller: bytes, recipient: bytes, account: str
) -> tuple[ContractState, EventRecord]:
    _require_organization(state, caller)
    if not state.is_recipient(recipient):
        raise NotARecipient(f"{recipient.hex()} is not an authorized recipient")
    raw = account.encode("utf-8")
    if len(raw) == 0:
        raise EmptyAccount("bank account must be non-empty")
    if len(raw) > MAX_ACCOUNT_BYTES:
        raise AccountTooLong(f"bank account is {len(raw)} bytes, max {MAX_ACCOUNT_BYTES}")

    digest = keccak256(raw)  # only the digest is ever stored
    bank_accounts = dict(state.bank_accounts)
    bank_accounts[recipient] = digest
    event = EventRecord(
        kind=EVENT_BANK_ACCOUNT_REGISTERED,
        actor=caller,
        subject=recipient,
        amount=0,
        account_digest=digest,
    )
    return (
        ContractState(state.organization, state.recipients, state.balances, bank_accounts),
        event,
    )


_CALL_FIELDS = {
    CallKind.ADD_RECIPIENT: ("recipient",),
    CallKind.REMOVE_RECIPIENT: ("recipient",),
    CallKind.SEND_ALLOWANCE: ("recipient", "amount"),
    CallKind.ADD_FUNDS: ("amount",),
    CallKind.GET_BALANCE: (),
    CallKind.REGISTER_BANK_ACCOUNT: ("recipient", "account"),
}


def check_call(call: ContractCall) -> None:
    """Raise MalformedCall unless field presence matches the call kind."""
    try:
        required = _CALL_FIELDS[CallKind(call.kind)]
    except ValueError:
        raise MalformedCall(f"unknown call kind {call.kind!r}") from None
    for name in ("recipient", "amount", "account"):
        value = getattr(call, name)
        if name in required and value is None:
            raise MalformedCall(f"{CALL_KIND_NAMES[call.kind]} requires {name}")
        if name not in required and value is not None:
            raise MalformedCall(f"{CALL_KIND_NAMES[call.kind]} does not take {name}")
    if call.recipient is not None and len(call.recipient) != 20:
        raise MalformedCall("recipient must be a 20-byte address")
    if call.amount is not None and not (0 <= call.amount <= MAX_AMOUNT):
        raise MalformedCall("amount must fit an unsigned 64-bit integer")


def apply(
    state: ContractState,
    caller: bytes,
    call: ContractCall,
    tx_hash: bytes = ZERO_DIGEST,
) -> tuple[ContractState, list[EventRecord]]:
    """Dispatch one call; returns the new state and any emitted events.

    Raises on any error, leaving ``state`` untouched. ``tx_hash`` is stamped
    into emitted events so the audit trail points back at its transaction.
    """
    check_call(call)
    kind = CallKind(call.kind)
    if kind == CallKind.ADD_RECIPIENT:
        return add_recipient(state, caller, call.recipient), []
    if kind == CallKind.REMOVE_RECIPIENT:
        return remove_recipient(state, caller, call.recipient), []
    if kind == CallKind.SEND_ALLOWANCE:
        new_state, event = send_allowance(state, caller, call.recipient, call.amount)
    elif kind == CallKind.ADD_FUNDS:
        new_state, event = add_funds(state, caller, call.amount)
    elif kind == CallKind.GET_BALANCE:
        return state, []
    else:
        new_state, event = register_bank_account(state, caller, call.recipient, call.account)
    stamped = EventRecord(
        kind=event.kind,
        actor=event.actor,
        subject=event.subject,
        amount=event.amount,
        account_digest=event.account_digest,
        tx_hash=tx_hash,
    )
    return new_state, [stamped]
