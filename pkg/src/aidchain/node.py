"""The running node: actor registry, mempool, commit pipeline, queries.

All mutations funnel through one lock-serialized pipeline (mempool to
consensus to ledger append); queries read committed snapshots and never
block it. In dev mode the node is the sole authority (n=1, quorum 1); in
consortium mode it drives the full authority set in-process over local
transport, one signed quorum round per block.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from typing import Optional

from aidchain import contract, keys
from aidchain.chain import Block, Chain, GenesisParams, Transaction, Vote, quorum_for
from aidchain.contract import CallKind
from aidchain.errors import (
    AidchainError,
    BadNonce,
    BadSignature,
    ConfigInvalid,
    DuplicateKey,
    Forbidden,
    InvalidTransaction,
    MalformedCall,
    MempoolFull,
    NoAllowances,
    NoRegisteredAccount,
    NotFound,
    SecondOrganization,
    Unauthorized,
    UnreadableLocation,
)
from aidchain.keys import KeyPair, address_to_hex, derive_address, parse_address
from aidchain.store import ChainStore

DEFAULT_MEMPOOL_SIZE = 1024
CHAIN_FILE = "chain.dat"
REGISTRY_FILE = "actors.json"
AUTHORITY_FILE = "authorities.json"
CONFIG_FILE = "config.json"


# ---- actors ----------------------------------------------------------------


@dataclass(frozen=True)
class ActorRecord:
    address: bytes
    public_key: bytes
    role: str
    display_name: str
    scheme: str = keys.SCHEME


class ActorRegistry:
    """Known signing identities; exactly one organization record."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records: dict = {}  # address -> ActorRecord
        self.api_nonces: dict = {}  # address -> last accepted request nonce

    def register(self, public_key: bytes, role: str, display_name: str) -> ActorRecord:
        if role not in ("organization", "recipient", "observer"):
            raise MalformedCall(f"unknown role {role!r}")
        if role == "organization" and any(r.role == "organization"
                                          for r in self.records.values()):
            raise SecondOrganization("an organization record already exists")
        address = derive_address(public_key)
        if address in self.records:
            raise DuplicateKey(f"{address_to_hex(address)} already registered")
        record = ActorRecord(address, public_key, role, display_name)
        self.records[address] = record
        self.save()
        return record

    def get(self, address: bytes) -> Optional[ActorRecord]:
        return self.records.get(address)

    def pubkey_for(self, address: bytes) -> Optional[bytes]:
        record = self.records.get(address)
        return record.public_key if record else None

    @property
    def organization(self) -> Optional[ActorRecord]:
        for record in self.records.values():
            if record.role == "organization":
                return record
        return None

    def bump_api_nonce(self, address: bytes, nonce: int) -> None:
        last = self.api_nonces.get(address, -1)
        if nonce <= last:
            raise BadNonce(expected=last + 1, got=nonce)
        self.api_nonces[address] = nonce
        self.save()

    def save(self) -> None:
        if self.path is None:
            return
        payload = {
            "actors": [
                {
                    "address": address_to_hex(r.address),
                    "public_key": r.public_key.hex(),
                    "role": r.role,
                    "display_name": r.display_name,
                    "scheme": r.scheme,
                }
                for r in sorted(self.records.values(), key=lambda r: r.address)
            ],
            "api_nonces": {address_to_hex(a): n for a, n in sorted(self.api_nonces.items())},
        }
        tmp = self.path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(payload, fh, indent=2)
        os.replace(tmp, self.path)

    @classmethod
    def load(cls, path: str) -> "ActorRegistry":
        registry = cls(path)
        if not os.path.exists(path):
            return registry
        with open(path) as fh:
            payload = json.load(fh)
        for entry in payload.get("actors", []):
            record = ActorRecord(
                address=parse_address(entry["address"]),
                public_key=bytes.fromhex(entry["public_key"]),
                role=entry["role"],
                display_name=entry.get("display_name", ""),
                scheme=entry.get("scheme", keys.SCHEME),
            )
            registry.records[record.address] = record
        for addr, nonce in payload.get("api_nonces", {}).items():
            registry.api_nonces[parse_address(addr)] = int(nonce)
        return registry


# ---- node configuration ------------------------------------------------------


@dataclass
class NodeConfig:
    data_dir: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8545
    authorities: int = 1
    mempool_size: int = DEFAULT_MEMPOOL_SIZE
    commit_interval: float = 0.05

    @property
    def mode(self) -> str:
        return "dev" if self.authorities == 1 else "consortium"

    def path(self, name: str) -> str:
        return os.path.join(self.data_dir, name)

    def save(self) -> None:
        payload = {
            "listen_host": self.listen_host,
            "listen_port": self.listen_port,
            "authorities": self.authorities,
            "mempool_size": self.mempool_size,
            "commit_interval": self.commit_interval,
        }
        with open(self.path(CONFIG_FILE), "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, data_dir: str) -> "NodeConfig":
        path = os.path.join(data_dir, CONFIG_FILE)
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise UnreadableLocation(f"{path}: {exc}") from exc
        return cls(
            data_dir=data_dir,
            listen_host=payload.get("listen_host", "127.0.0.1"),
            listen_port=int(payload.get("listen_port", 8545)),
            authorities=int(payload.get("authorities", 1)),
            mempool_size=int(payload.get("mempool_size", DEFAULT_MEMPOOL_SIZE)),
            commit_interval=float(payload.get("commit_interval", 0.05)),
        )


@dataclass
class SettlementRecord:
    recipient: bytes
    account_digest: bytes
    total_amount: int
    tx_hashes: list
    height: int

    def to_json(self) -> dict:
        return {
            "recipient": address_to_hex(self.recipient),
            "account_digest": self.account_digest.hex(),
            "total_amount": str(self.total_amount),
            "tx_hashes": [h.hex() for h in self.tx_hashes],
            "height": self.height,
        }


# ---- the node -------------------------------------------------------------------


class Node:
    """Single-process node over a persisted chain.

    Thread-safety: one re-entrant lock guards the mutation pipeline and the
    indexes it maintains; queries take the same lock briefly to snapshot.
    """

    def __init__(self, config: NodeConfig, registry: ActorRegistry,
                 chain: Chain, authority_pairs: dict):
        self.config = config
        self.registry = registry
        self.chain = chain
        self.authority_pairs = authority_pairs
        self.lock = threading.RLock()
        self.mempool: list = []
        self._spec_state = chain.state
        self._spec_nonces = chain.nonces
        replayed = chain.replay_full(verify_votes=False)
        self.events: list = replayed.events  # (height, EventRecord) in chain order
        self.tx_index: dict = {}
        for block in chain.blocks:
            for index, tx in enumerate(block.transactions):
                self.tx_index[tx.hash] = (block.height, index)
        self.round = self._next_round()
        self._pipeline: Optional[threading.Thread] = None
        self._stop = threading.Event()

    # -- bootstrap ---------------------------------------------------------------

    @classmethod
    def initialize(cls, data_dir: str, organization_pubkey: bytes,
                   organization_name: str = "organization",
                   authorities: int = 1, listen_host: str = "127.0.0.1",
                   listen_port: int = 8545) -> "Node":
        """Create a data directory: genesis chain, registry, authority keys."""
        os.makedirs(data_dir, exist_ok=True)
        config = NodeConfig(data_dir=data_dir, listen_host=listen_host,
                            listen_port=listen_port, authorities=authorities)
        if os.path.exists(config.path(CHAIN_FILE)):
            raise ConfigInvalid(f"{config.path(CHAIN_FILE)} already exists")

        authority_pairs = {i: KeyPair.generate() for i in range(authorities)}
        with open(config.path(AUTHORITY_FILE), "w") as fh:
            json.dump({str(i): p.seed.hex() for i, p in authority_pairs.items()}, fh)
            fh.write("\n")
        os.chmod(config.path(AUTHORITY_FILE), 0o600)

        params = GenesisParams(
            organization_pubkey=organization_pubkey,
            authorities=tuple((i, authority_pairs[i].public_key)
                              for i in range(authorities)),
            quorum=quorum_for(authorities),
        )
        registry = ActorRegistry(config.path(REGISTRY_FILE))
        registry.register(organization_pubkey, "organization", organization_name)
        store = ChainStore(config.path(CHAIN_FILE))
        chain = Chain.create(params, store=store, extra_key_resolver=registry.pubkey_for)
        config.save()
        return cls(config, registry, chain, authority_pairs)

    @classmethod
    def open(cls, data_dir: str) -> "Node":
        config = NodeConfig.load(data_dir)
        registry = ActorRegistry.load(config.path(REGISTRY_FILE))
        with open(config.path(AUTHORITY_FILE)) as fh:
            authority_pairs = {int(k): KeyPair.from_seed(bytes.fromhex(v))
                               for k, v in json.load(fh).items()}
        store = ChainStore(config.path(CHAIN_FILE))
        loaded = store.load()
        if loaded.warning:
            import logging

            logging.getLogger(__name__).warning("chain store recovered: %s", loaded.warning)
        from aidchain.chain import decode_block

        params = GenesisParams.decode(loaded.genesis_params)
        blocks = [decode_block(p) for p in loaded.block_payloads]
        chain = Chain(params, blocks, store, extra_key_resolver=registry.pubkey_for)
        return cls(config, registry, chain, authority_pairs)

    def _next_round(self) -> int:
        tip = self.chain.tip
        if not tip.votes:
            return 0
        return tip.votes[0].round + 1

    # -- actors --------------------------------------------------------------------

    def register_actor(self, caller: Optional[bytes], public_key: bytes,
                       role: str, display_name: str) -> ActorRecord:
        org = self.registry.organization
        if org is None or caller != org.address:
            raise Unauthorized("only the organization registers actors")
        with self.lock:
            return self.registry.register(public_key, role, display_name)

    def get_actor(self, address: bytes) -> ActorRecord:
        record = self.registry.get(address)
        if record is None:
            raise NotFound(f"no actor {address_to_hex(address)}")
        return record

    def next_tx_nonce(self, sender: bytes) -> int:
        with self.lock:
            return self._spec_nonces.get(sender, 0)

    # -- transaction intake ----------------------------------------------------------

    def submit_transaction(self, tx: Transaction) -> bytes:
        with self.lock:
            pubkey = self.chain.resolve_key(tx.sender)
            if pubkey is None:
                raise BadSignature(f"unknown sender {address_to_hex(tx.sender)}")
            tx.verify_signature(pubkey)
            if tx.call.kind == CallKind.GET_BALANCE:
                raise MalformedCall("balance reads are served off-chain, not as transactions")
            expected = self._spec_nonces.get(tx.sender, 0)
            if tx.nonce != expected:
                raise BadNonce(expected=expected, got=tx.nonce)
            if len(self.mempool) >= self.config.mempool_size:
                raise MempoolFull(f"mempool at capacity {self.config.mempool_size}")
            # contract preconditions against the speculative state; ContractError
            # propagates to the caller and nothing enters the pool
            new_state, _ = contract.apply(self._spec_state, tx.sender, tx.call)
            self.mempool.append(tx)
            self._spec_state = new_state
            self._spec_nonces = {**self._spec_nonces, tx.sender: expected + 1}
            return tx.hash

    def pending_count(self) -> int:
        with self.lock:
            return len(self.mempool)

    # -- commit pipeline ---------------------------------------------------------------

    def commit_pending(self) -> Optional[Block]:
        """Drain the mempool into one quorum-certified block.

        Mempool admission makes invalid batches impossible in normal
        operation; if one shows up anyway, the offending transaction is
        evicted and the speculative view rebuilt instead of wedging the
        pipeline forever.
        """
        with self.lock:
            if not self.mempool:
                return None
            batch = tuple(self.mempool)
            from aidchain.chain import build_block

            try:
                build = build_block(self.chain.tip, batch,
                                    self.chain.params.proposer_for(self.round),
                                    self.chain.state, self.chain.resolve_key,
                                    self.chain.nonces)
            except InvalidTransaction as exc:
                evicted = self.mempool.pop(exc.index)
                import logging

                logging.getLogger(__name__).warning(
                    "evicted transaction %s from mempool: %s",
                    evicted.hash.hex(), exc.reason)
                self._rebuild_speculative()
                return None
            votes = [Vote.create(pair, authority_id, build.block.hash, self.round)
                     for authority_id, pair in sorted(self.authority_pairs.items())]
            block = build.block.with_votes(votes)
            self.chain.append(block)
            for index, tx in enumerate(block.transactions):
                self.tx_index[tx.hash] = (block.height, index)
            self.events.extend((block.height, ev) for ev in build.events)
            self.mempool = []
            self._spec_state = self.chain.state
            self._spec_nonces = self.chain.nonces
            self.round += 1
            return block

    def _rebuild_speculative(self) -> None:
        """Re-admit the surviving mempool against the committed state."""
        state = self.chain.state
        nonces = self.chain.nonces
        survivors = []
        for tx in self.mempool:
            if tx.nonce != nonces.get(tx.sender, 0):
                continue
            try:
                state, _ = contract.apply(state, tx.sender, tx.call)
            except AidchainError:
                continue
            nonces[tx.sender] = tx.nonce + 1
            survivors.append(tx)
        self.mempool = survivors
        self._spec_state = state
        self._spec_nonces = nonces

    def start(self) -> None:
        if self._pipeline is not None:
            return
        self._stop.clear()

        def loop():
            while not self._stop.wait(self.config.commit_interval):
                try:
                    self.commit_pending()
                except Exception:  # noqa: BLE001 - pipeline must survive
                    import logging

                    logging.getLogger(__name__).exception("commit pipeline failure")

        self._pipeline = threading.Thread(target=loop, name="commit-pipeline", daemon=True)
        self._pipeline.start()

    def stop(self) -> None:
        if self._pipeline is None:
            return
        self._stop.set()
        self._pipeline.join()
        self._pipeline = None

    # -- queries (committed data only) ---------------------------------------------------

    def query_balance(self, caller: bytes, subject: bytes) -> int:
        org = self.registry.organization
        if caller != subject and (org is None or caller != org.address):
            raise Forbidden("only the organization reads other balances")
        with self.lock:
            return self.chain.state.balance_of(subject)

    def query_events(self, kind: Optional[str] = None, address: Optional[bytes] = None,
                     from_height: Optional[int] = None,
                     to_height: Optional[int] = None) -> list:
        with self.lock:
            snapshot = list(self.events)
        out = []
        for height, event in snapshot:
            if kind is not None and event.kind != kind:
                continue
            if address is not None and address not in (event.subject, event.actor):
                continue
            if from_height is not None and height < from_height:
                continue
            if to_height is not None and height > to_height:
                continue
            out.append((height, event))
        return out

    def query_block(self, height: int) -> Block:
        with self.lock:
            if 0 <= height <= self.chain.height:
                return self.chain.blocks[height]
        raise NotFound(f"no block at height {height}")

    def query_tx(self, tx_hash: bytes):
        with self.lock:
            location = self.tx_index.get(tx_hash)
            if location is None:
                raise NotFound(f"no committed transaction {tx_hash.hex()}")
            height, index = location
            return self.chain.blocks[height].transactions[index], height, index

    def export_settlement(self, caller: bytes, recipient: bytes) -> SettlementRecord:
        org = self.registry.organization
        if org is None or caller != org.address:
            raise Unauthorized("only the organization exports settlements")
        with self.lock:
            digest = self.chain.state.account_digest_of(recipient)
            if digest is None:
                raise NoRegisteredAccount(
                    f"{address_to_hex(recipient)} has no registered bank account")
            hits = [(h, ev) for h, ev in self.events
                    if ev.kind == contract.EVENT_ALLOWANCE_SENT and ev.subject == recipient]
            if not hits:
                raise NoAllowances(f"{address_to_hex(recipient)} has no allowances")
            total = sum(ev.amount for _, ev in hits)
            return SettlementRecord(
                recipient=recipient,
                account_digest=digest,
                total_amount=total,
                tx_hashes=[ev.tx_hash for _, ev in hits],
                height=self.chain.height,
            )

    def health(self) -> dict:
        with self.lock:
            return {
                "status": "ok",
                "height": self.chain.height,
                "pending": len(self.mempool),
                "mode": self.config.mode,
            }

    def check_api_nonce(self, sender: bytes, nonce: int) -> None:
        with self.lock:
            self.registry.bump_api_nonce(sender, nonce)
