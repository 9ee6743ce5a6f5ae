"""Exception hierarchy shared by the contract, ledger, consensus and node layers.

Every error carries a stable ``code`` string used in API payloads and CLI
output, so error identity survives serialization.
"""


class AidchainError(Exception):
    code = "Error"

    def __init__(self, detail: str = ""):
        self.detail = detail
        super().__init__(detail or self.code)

    def __str__(self) -> str:
        if self.detail:
            return f"{self.code}: {self.detail}"
        return self.code


# ---- contract ----------------------------------------------------------


class ContractError(AidchainError):
    code = "ContractError"


class Unauthorized(ContractError):
    code = "Unauthorized"


class NotARecipient(ContractError):
    code = "NotARecipient"


class InsufficientFunds(ContractError):
    code = "InsufficientFunds"


class ZeroAmount(ContractError):
    code = "ZeroAmount"


class Overflow(ContractError):
    code = "Overflow"


class EmptyAccount(ContractError):
    code = "EmptyAccount"


class AccountTooLong(ContractError):
    code = "AccountTooLong"


class MalformedCall(ContractError):
    code = "MalformedCall"


# ---- ledger ------------------------------------------------------------


class LedgerError(AidchainError):
    code = "LedgerError"


class InvalidTransaction(LedgerError):
    code = "InvalidTransaction"

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"tx {index}: {reason}")


class BadParent(LedgerError):
    code = "BadParent"


class BadHeight(LedgerError):
    code = "BadHeight"


class WrongProposer(LedgerError):
    code = "WrongProposer"


class BadStateRoot(LedgerError):
    code = "BadStateRoot"


class InsufficientVotes(LedgerError):
    code = "InsufficientVotes"


class ChainCorrupt(LedgerError):
    code = "ChainCorrupt"

    def __init__(self, height: int, reason: str):
        self.height = height
        self.reason = reason
        super().__init__(f"height {height}: {reason}")


class CorruptStore(LedgerError):
    code = "CorruptStore"


class UnreadableLocation(LedgerError):
    code = "UnreadableLocation"


class DecodeError(LedgerError):
    code = "DecodeError"


# ---- consensus ---------------------------------------------------------


class ConfigInvalid(AidchainError):
    code = "ConfigInvalid"


# ---- node service ------------------------------------------------------


class NodeError(AidchainError):
    code = "NodeError"


class BadSignature(NodeError):
    code = "BadSignature"


class BadNonce(NodeError):
    code = "BadNonce"

    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected {expected}, got {got}")


class MempoolFull(NodeError):
    code = "MempoolFull"


class Forbidden(NodeError):
    code = "Forbidden"


class NotFound(NodeError):
    code = "NotFound"


class DuplicateKey(NodeError):
    code = "DuplicateKey"


class SecondOrganization(NodeError):
    code = "SecondOrganization"


class NoRegisteredAccount(NodeError):
    code = "NoRegisteredAccount"


class NoAllowances(NodeError):
    code = "NoAllowances"


class BadFilter(NodeError):
    code = "BadFilter"
