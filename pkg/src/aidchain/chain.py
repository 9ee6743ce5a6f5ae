"""Hash-chained ledger: transactions, quorum-voted blocks, replay.

A chain is a genesis parameter set plus an ordered list of blocks. Block
hashes cover everything except the votes, votes sign (block hash, round),
and every block commits to the full post-block contract state via its state
root. Only transactions that execute cleanly are ever included in a block;
replay is therefore infallible on an untampered chain and any byte flip
surfaces as a located verification error.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from aidchain import contract, keys
from aidchain.contract import ContractCall, ContractState, EventRecord
from aidchain.encoding import (
    Reader,
    encode_bytes,
    encode_call,
    encode_state,
    encode_u32,
    encode_u64,
    decode_call,
)
from aidchain.errors import (
    BadHeight,
    BadParent,
    BadSignature,
    BadStateRoot,
    ChainCorrupt,
    ConfigInvalid,
    ContractError,
    DecodeError,
    InsufficientVotes,
    InvalidTransaction,
    MalformedCall,
    WrongProposer,
)
from aidchain.keccak import ZERO_DIGEST, keccak256

KeyResolver = Callable[[bytes], Optional[bytes]]


def quorum_for(n: int) -> int:
    """Minimum votes to commit: floor(2n/3) + 1 (tolerates f faults, n = 3f+1)."""
    return (2 * n) // 3 + 1


# ---- genesis parameters --------------------------------------------------


@dataclass(frozen=True)
class GenesisParams:
    """Consortium constitution: signing scheme, organization key, authority set."""

    organization_pubkey: bytes
    authorities: tuple  # tuple of (authority_id, pubkey)
    quorum: int
    scheme: str = keys.SCHEME

    def __post_init__(self):
        ids = [a[0] for a in self.authorities]
        if len(set(ids)) != len(ids):
            raise ConfigInvalid("authority ids must be unique")
        if not self.authorities:
            raise ConfigInvalid("at least one authority required")
        expected = quorum_for(len(self.authorities))
        if self.quorum != expected:
            raise ConfigInvalid(
                f"quorum must be floor(2n/3)+1 = {expected} for n={len(self.authorities)}"
            )
        if self.scheme != keys.SCHEME:
            raise ConfigInvalid(f"unsupported signature scheme {self.scheme!r}")

    @property
    def organization(self) -> bytes:
        return keys.derive_address(self.organization_pubkey)

    def authority_pubkey(self, authority_id: int) -> Optional[bytes]:
        for aid, pubkey in self.authorities:
            if aid == authority_id:
                return pubkey
        return None

    def proposer_for(self, round_number: int) -> int:
        return self.authorities[round_number % len(self.authorities)][0]

    def resolve_sender_key(self, address: bytes) -> Optional[bytes]:
        if address == self.organization:
            return self.organization_pubkey
        return None

    def encode(self) -> bytes:
        out = [encode_bytes(self.scheme.encode("ascii"))]
        out.append(encode_bytes(self.organization_pubkey))
        out.append(encode_u32(len(self.authorities)))
        for aid, pubkey in self.authorities:
            out.append(encode_u32(aid))
            out.append(encode_bytes(pubkey))
        out.append(encode_u32(self.quorum))
        return b"".join(out)

    @classmethod
    def decode(cls, payload: bytes) -> "GenesisParams":
        r = Reader(payload)
        scheme = r.var_bytes().decode("ascii", errors="replace")
        org_pubkey = r.var_bytes()
        authorities = tuple((r.u32(), r.var_bytes()) for _ in range(r.u32()))
        quorum = r.u32()
        r.expect_end()
        try:
            return cls(org_pubkey, authorities, quorum, scheme)
        except ConfigInvalid as exc:
            raise DecodeError(f"bad genesis parameters: {exc}") from exc


# ---- transactions --------------------------------------------------------


def tx_signing_bytes(sender: bytes, nonce: int, call: ContractCall) -> bytes:
    return sender + encode_u64(nonce) + encode_call(call)


@dataclass(frozen=True)
class Transaction:
    sender: bytes
    nonce: int
    call: ContractCall
    signature: bytes
    hash: bytes

    @classmethod
    def create(cls, pair: keys.KeyPair, nonce: int, call: ContractCall) -> "Transaction":
        contract.check_call(call)
        signing = tx_signing_bytes(pair.address, nonce, call)
        signature = pair.sign(signing)
        full = signing + encode_bytes(signature)
        return cls(pair.address, nonce, call, signature, keccak256(full))

    def encode(self) -> bytes:
        return tx_signing_bytes(self.sender, self.nonce, self.call) + encode_bytes(self.signature)

    def verify_signature(self, public_key: bytes) -> None:
        keys.verify(public_key, tx_signing_bytes(self.sender, self.nonce, self.call), self.signature)


def decode_transaction(r: Reader) -> Transaction:
    start = r.pos
    sender = r.address()
    nonce = r.u64()
    call = decode_call(r)
    signature = r.var_bytes()
    full = r.data[start:r.pos]
    return Transaction(sender, nonce, call, signature, keccak256(full))


# ---- votes and blocks ----------------------------------------------------


def vote_signing_bytes(block_hash: bytes, round_number: int) -> bytes:
    return block_hash + encode_u64(round_number)


@dataclass(frozen=True)
class Vote:
    voter: int
    round: int
    signature: bytes

    @classmethod
    def create(cls, pair: keys.KeyPair, voter: int, block_hash: bytes, round_number: int) -> "Vote":
        return cls(voter, round_number, pair.sign(vote_signing_bytes(block_hash, round_number)))

    def encode(self) -> bytes:
        return encode_u32(self.voter) + encode_u64(self.round) + encode_bytes(self.signature)


def decode_vote(r: Reader) -> Vote:
    return Vote(r.u32(), r.u64(), r.var_bytes())


@dataclass(frozen=True)
class Block:
    height: int
    parent_hash: bytes
    proposer: int
    transactions: tuple
    state_root: bytes
    votes: tuple = ()
    hash: bytes = b""

    @staticmethod
    def header_bytes(height, parent_hash, proposer, transactions, state_root) -> bytes:
        out = [encode_u64(height), parent_hash, encode_u32(proposer),
               encode_u32(len(transactions))]
        out.extend(tx.encode() for tx in transactions)
        out.append(state_root)
        return b"".join(out)

    @classmethod
    def create(cls, height, parent_hash, proposer, transactions, state_root, votes=()) -> "Block":
        transactions = tuple(transactions)
        header = cls.header_bytes(height, parent_hash, proposer, transactions, state_root)
        return cls(height, parent_hash, proposer, transactions, state_root,
                   tuple(votes), keccak256(header))

    def with_votes(self, votes) -> "Block":
        return replace(self, votes=tuple(sorted(votes, key=lambda v: v.voter)))

    def encode(self) -> bytes:
        """Store encoding: hashed header fields followed by the vote list."""
        out = [Block.header_bytes(self.height, self.parent_hash, self.proposer,
                                  self.transactions, self.state_root)]
        out.append(encode_u32(len(self.votes)))
        out.extend(v.encode() for v in self.votes)
        return b"".join(out)


def decode_block(payload: bytes) -> Block:
    r = Reader(payload)
    height = r.u64()
    parent_hash = r.digest()
    proposer = r.u32()
    transactions = tuple(decode_transaction(r) for _ in range(r.u32()))
    state_root = r.digest()
    votes = tuple(decode_vote(r) for _ in range(r.u32()))
    r.expect_end()
    return Block.create(height, parent_hash, proposer, transactions, state_root, votes)


def state_root_of(state: ContractState) -> bytes:
    return keccak256(encode_state(state))


def make_genesis_block(params: GenesisParams) -> Block:
    state = contract.init(params.organization)
    return Block.create(0, ZERO_DIGEST, 0, (), state_root_of(state))


# ---- block building and execution ----------------------------------------


@dataclass
class BlockBuild:
    block: Block
    state: ContractState
    events: list
    nonces: dict


def build_block(
    parent: Block,
    txs,
    proposer: int,
    state: ContractState,
    key_resolver: KeyResolver,
    nonces: dict,
) -> BlockBuild:
    """Assemble an unvoted block; every transaction must verify and apply.

    ``nonces`` maps sender address to the next expected nonce and is not
    mutated; the advanced copy comes back in the result.
    """
    working = state
    next_nonces = dict(nonces)
    events: list[EventRecord] = []
    txs = tuple(txs)
    for i, tx in enumerate(txs):
        try:
            contract.check_call(tx.call)
        except MalformedCall as exc:
            raise InvalidTransaction(i, f"malformed call: {exc.detail}") from exc
        pubkey = key_resolver(tx.sender)
        if pubkey is None:
            raise InvalidTransaction(i, f"no key known for sender 0x{tx.sender.hex()}")
        try:
            tx.verify_signature(pubkey)
        except BadSignature as exc:
            raise InvalidTransaction(i, f"bad signature: {exc.detail}") from exc
        expected = next_nonces.get(tx.sender, 0)
        if tx.nonce != expected:
            raise InvalidTransaction(i, f"nonce {tx.nonce}, expected {expected}")
        try:
            working, produced = contract.apply(working, tx.sender, tx.call, tx_hash=tx.hash)
        except ContractError as exc:
            raise InvalidTransaction(i, f"{exc.code}: {exc.detail}") from exc
        next_nonces[tx.sender] = expected + 1
        events.extend(produced)
    block = Block.create(parent.height + 1, parent.hash, proposer, txs, state_root_of(working))
    return BlockBuild(block, working, events, next_nonces)


# ---- the chain -----------------------------------------------------------


@dataclass
class ReplayResult:
    state: ContractState
    events: list  # (height, EventRecord)
    nonces: dict


class Chain:
    """In-memory chain with optional persistence via a ChainStore.

    Single-writer: callers serialize append/persist; reads of committed
    blocks are safe from any number of threads.
    """

    def __init__(self, params: GenesisParams, blocks: list, store=None,
                 extra_key_resolver: Optional[KeyResolver] = None):
        self.params = params
        self.blocks = blocks
        self.store = store
        self.extra_key_resolver = extra_key_resolver
        replayed = self.replay_full(verify_votes=False)
        self._state = replayed.state
        self._nonces = replayed.nonces

    @classmethod
    def create(cls, params: GenesisParams, store=None, extra_key_resolver=None) -> "Chain":
        genesis = make_genesis_block(params)
        if store is not None:
            store.initialize(params.encode(), genesis.encode())
        return cls(params, [genesis], store, extra_key_resolver)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    @property
    def state(self) -> ContractState:
        return self._state

    @property
    def nonces(self) -> dict:
        return dict(self._nonces)

    def resolve_key(self, address: bytes) -> Optional[bytes]:
        pubkey = self.params.resolve_sender_key(address)
        if pubkey is None and self.extra_key_resolver is not None:
            pubkey = self.extra_key_resolver(address)
        return pubkey

    # -- validation --------------------------------------------------------

    def check_genesis(self, block: Block) -> None:
        expected = make_genesis_block(self.params)
        if block.hash != expected.hash or block.votes:
            raise ChainCorrupt(0, "genesis block does not match genesis parameters")

    def check_votes(self, block: Block) -> None:
        if not block.votes:
            raise InsufficientVotes(f"block {block.height} carries no votes")
        rounds = {v.round for v in block.votes}
        if len(rounds) != 1:
            raise InsufficientVotes(f"block {block.height} mixes vote rounds {sorted(rounds)}")
        round_number = rounds.pop()
        if self.params.proposer_for(round_number) != block.proposer:
            raise WrongProposer(
                f"block {block.height}: proposer {block.proposer} is not the "
                f"round {round_number} leader"
            )
        valid_voters = set()
        for vote in block.votes:
            pubkey = self.params.authority_pubkey(vote.voter)
            if pubkey is None:
                raise InsufficientVotes(f"block {block.height}: unknown voter {vote.voter}")
            try:
                keys.verify(pubkey, vote_signing_bytes(block.hash, vote.round), vote.signature)
            except BadSignature:
                raise InsufficientVotes(
                    f"block {block.height}: vote by {vote.voter} does not verify"
                ) from None
            valid_voters.add(vote.voter)
        if len(valid_voters) < self.params.quorum:
            raise InsufficientVotes(
                f"block {block.height}: {len(valid_voters)} valid votes, "
                f"quorum is {self.params.quorum}"
            )

    def check_linkage(self, block: Block) -> None:
        if block.height != self.height + 1:
            raise BadHeight(f"got height {block.height}, tip is {self.height}")
        if block.parent_hash != self.tip.hash:
            raise BadParent(f"block {block.height} does not link to the tip")

    def validate_proposal(self, block: Block) -> BlockBuild:
        """Check a successor candidate ignoring votes (used before voting)."""
        self.check_linkage(block)
        build = build_block(self.tip, block.transactions, block.proposer,
                            self._state, self.resolve_key, self._nonces)
        if build.block.state_root != block.state_root:
            raise BadStateRoot(f"block {block.height}: state root mismatch")
        return build

    def validate_block(self, block: Block) -> BlockBuild:
        """Full check of a candidate successor block against the current tip."""
        self.check_linkage(block)
        self.check_votes(block)
        return self.validate_proposal(block)

    def append(self, block: Block) -> None:
        """Validate, persist, then expose the new block (in that order)."""
        build = self.validate_block(block)
        if self.store is not None:
            self.store.append_record(block.encode())
        self.blocks.append(block)
        self._state = build.state
        self._nonces = build.nonces

    # -- replay and verification -------------------------------------------

    def replay_full(self, verify_votes: bool = True) -> ReplayResult:
        """Re-derive the contract state from genesis, re-checking every block.

        Hash links and state roots are always verified; quorum votes too
        unless ``verify_votes`` is false. Raises ChainCorrupt on the first
        failing height.
        """
        if not self.blocks:
            raise ChainCorrupt(0, "chain has no genesis block")
        self.check_genesis(self.blocks[0])
        state = contract.init(self.params.organization)
        nonces: dict = {}
        events: list = []
        parent = self.blocks[0]
        for block in self.blocks[1:]:
            height = block.height
            if height != parent.height + 1:
                raise ChainCorrupt(height, f"height {height} after {parent.height}")
            if block.parent_hash != parent.hash:
                raise ChainCorrupt(height, "broken parent hash link")
            if verify_votes:
                try:
                    self.check_votes(block)
                except (InsufficientVotes, WrongProposer) as exc:
                    raise ChainCorrupt(height, exc.detail) from exc
            try:
                build = build_block(parent, block.transactions, block.proposer,
                                    state, self.resolve_key, nonces)
            except InvalidTransaction as exc:
                raise ChainCorrupt(height, exc.detail) from exc
            if build.block.state_root != block.state_root:
                raise ChainCorrupt(height, "state root does not match replayed state")
            state = build.state
            nonces = build.nonces
            events.extend((height, ev) for ev in build.events)
            parent = block
        return ReplayResult(state, events, nonces)

    def replay(self) -> ContractState:
        return self.replay_full(verify_votes=False).state

    def verify(self) -> ReplayResult:
        """Strict audit pass: links, signatures, votes, roots, everything."""
        return self.replay_full(verify_votes=True)
