"""Consortium consensus: round-robin proposers, quorum votes, fault simulation.

The protocol is a single-shot quorum vote per round. The round leader
(authorities in fixed rotation) proposes one block; authorities validate and
return signed votes; at quorum the leader broadcasts the certified block and
everyone appends it. A round that produces no certificate is skipped and the
rotation moves on.

Safety comes from two rules. First, quorum is floor(2n/3)+1, so two
certificates for the same height would need more honest voters than exist
with at most f = (n-1)/3 equivocators. Second, an honest authority that
votes for a block locks on it: it never votes for a different block at the
same height, though a valid certificate always overrides a lock (if a
certificate exists, no conflicting one can). Lagging nodes catch up by
requesting certified blocks from whoever announced a higher tip, so skipped
rounds cost liveness, never consistency.

Everything here is deterministic: discrete ticks, seeded randomness, ordered
message queues. Equal (config, workload, faults, seed) give byte-equal traces.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from aidchain import keys
from aidchain.chain import (
    Block,
    Chain,
    GenesisParams,
    Transaction,
    Vote,
    build_block,
    quorum_for,
    vote_signing_bytes,
)
from aidchain.contract import CallKind, ContractCall
from aidchain.encoding import encode_u32, encode_u64
from aidchain.errors import AidchainError, BadSignature, ConfigInvalid
from aidchain.keccak import keccak256


# ---- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class AuthorityConfig:
    """Consortium membership: rotation order, quorum, simulated round length."""

    authorities: tuple  # tuple of (authority_id, public_key), rotation order
    quorum: int
    round_duration: int = 8

    def __post_init__(self):
        ids = [a[0] for a in self.authorities]
        if len(set(ids)) != len(ids):
            raise ConfigInvalid("authority ids must be unique")
        n = len(self.authorities)
        if n == 0:
            raise ConfigInvalid("at least one authority required")
        if self.quorum != quorum_for(n):
            raise ConfigInvalid(f"quorum must be floor(2n/3)+1 = {quorum_for(n)} for n={n}")
        if self.round_duration < 4:
            raise ConfigInvalid("round_duration must allow propose/vote/commit (>= 4 ticks)")

    @property
    def n(self) -> int:
        return len(self.authorities)


def select_proposer(config: AuthorityConfig, round_number: int) -> int:
    """Round-robin rotation: authorities[round mod n]."""
    return config.authorities[round_number % config.n][0]


class Behavior(Enum):
    HONEST = "honest"
    CRASHED = "crash"
    EQUIVOCATING = "equivocate"
    PARTITIONED = "partition"


@dataclass
class FaultSchedule:
    """Per-authority behavior per round; fixed before the run."""

    entries: list = field(default_factory=list)  # (authority_id, first, last, Behavior)

    def add(self, authority_id: int, behavior: Behavior, first: int, last: int) -> None:
        self.entries.append((authority_id, first, last, behavior))

    def behavior_for(self, authority_id: int, round_number: int) -> Behavior:
        result = Behavior.HONEST
        for aid, first, last, behavior in self.entries:
            if aid == authority_id and first <= round_number <= last:
                result = behavior
        return result

    def ever_equivocates(self, authority_id: int) -> bool:
        return any(aid == authority_id and b is Behavior.EQUIVOCATING
                   for aid, _, _, b in self.entries)


# ---- messages ----------------------------------------------------------------


@dataclass(frozen=True)
class Proposal:
    round: int
    block: Block


@dataclass(frozen=True)
class VoteMsg:
    round: int
    vote: Vote
    block_hash: bytes


@dataclass(frozen=True)
class Commit:
    round: int
    block: Block


@dataclass(frozen=True)
class TipAnnounce:
    height: int


@dataclass(frozen=True)
class SyncRequest:
    from_height: int


@dataclass(frozen=True)
class SyncResponse:
    blocks: tuple


# ---- per-authority protocol state ---------------------------------------------


class SimNode:
    def __init__(self, authority_id: int, pair: keys.KeyPair, params: GenesisParams,
                 workload: tuple):
        self.id = authority_id
        self.pair = pair
        self.chain = Chain.create(params)
        self.workload = workload
        self.locks: dict = {}  # height -> Block voted for at that height
        self.proposal_votes: dict = {}  # block_hash -> {voter: Vote}
        self.proposal_blocks: dict = {}  # block_hash -> Block
        self.certified: set = set()  # block hashes already broadcast as certificates

    @property
    def tip_height(self) -> int:
        return self.chain.height

    def pending_txs(self) -> list:
        committed = {tx.hash for b in self.chain.blocks for tx in b.transactions}
        return [tx for tx in self.workload if tx.hash not in committed]

    def accept_certificate(self, block: Block) -> bool:
        """Append a certified block if it extends the tip; certificates override locks."""
        if block.height != self.chain.height + 1:
            return False
        try:
            self.chain.append(block)
        except AidchainError:
            return False
        self.locks.pop(block.height, None)
        return True


# ---- the simulator --------------------------------------------------------------


@dataclass
class RoundOutcome:
    round: int
    committed: Optional[Block]
    reason: str = ""


@dataclass
class Violation:
    height: int
    nodes: list


@dataclass
class SimulationTrace:
    lines: list
    committed: dict  # node_id -> list of (height, block_hash_hex)
    honest_ids: set
    final_heights: dict
    outcomes: list

    def render(self) -> str:
        return "\n".join(self.lines) + "\n"


def check_safety(trace: SimulationTrace):
    """ok (None) unless two honest nodes committed different blocks at a height."""
    by_height: dict = {}
    for node_id in sorted(trace.committed):
        if node_id not in trace.honest_ids:
            continue
        for height, block_hash in trace.committed[node_id]:
            by_height.setdefault(height, {}).setdefault(block_hash, []).append(node_id)
    for height in sorted(by_height):
        if len(by_height[height]) > 1:
            nodes = sorted(n for group in by_height[height].values() for n in group)
            return Violation(height, nodes)
    return None


class Simulator:
    """Deterministic tick-driven run of the consortium over a fault schedule."""

    def __init__(self, config: AuthorityConfig, authority_pairs: dict,
                 params: GenesisParams, workload, faults: FaultSchedule,
                 seed: int, max_rounds: int):
        for aid, pubkey in config.authorities:
            pair = authority_pairs.get(aid)
            if pair is None or pair.public_key != pubkey:
                raise ConfigInvalid(f"missing or mismatched key for authority {aid}")
        self.config = config
        self.params = params
        self.faults = faults
        self.seed = seed
        self.max_rounds = max_rounds
        self.rng = random.Random(seed)
        self.workload = tuple(workload)
        self.nodes = {aid: SimNode(aid, authority_pairs[aid], params, self.workload)
                      for aid, _ in config.authorities}
        self.queue: list = []  # heap of (tick, seq, src, dest, message)
        self._seq = 0
        self.lines: list = []
        self.round = 0
        self.tick = 0
        self.outcomes: list = []
        self._round_commits: list = []

    # -- infrastructure ---------------------------------------------------------

    def log(self, phase: str, msg: str, node: Optional[int] = None) -> None:
        where = f" node={node}" if node is not None else ""
        self.lines.append(f"round={self.round} phase={phase}{where} msg={msg}")

    def behavior(self, authority_id: int) -> Behavior:
        return self.faults.behavior_for(authority_id, self.round)

    def send(self, src: int, dest: int, message) -> None:
        if src == dest:
            return
        if self.behavior(src) in (Behavior.CRASHED, Behavior.PARTITIONED):
            return
        self._seq += 1
        heapq.heappush(self.queue, (self.tick + 1, self._seq, src, dest, message))

    def broadcast(self, src: int, message) -> None:
        for dest in sorted(self.nodes):
            self.send(src, dest, message)

    # -- protocol steps -----------------------------------------------------------

    def start_round(self) -> None:
        for node_id in sorted(self.nodes):
            if self.behavior(node_id) is Behavior.HONEST:
                self.broadcast(node_id, TipAnnounce(self.nodes[node_id].tip_height))
        proposer_id = select_proposer(self.config, self.round)
        behavior = self.behavior(proposer_id)
        if behavior is Behavior.HONEST:
            self.propose(proposer_id)
        elif behavior is Behavior.EQUIVOCATING:
            self.propose_equivocating(proposer_id)
        # crashed / partitioned proposers stay silent

    def make_block(self, node: SimNode, txs) -> Block:
        build = build_block(node.chain.tip, txs, node.id, node.chain.state,
                            node.chain.resolve_key, node.chain.nonces)
        return build.block

    def propose(self, proposer_id: int) -> None:
        node = self.nodes[proposer_id]
        height = node.tip_height + 1
        lock = node.locks.get(height)
        if lock is not None:
            if lock.proposer != proposer_id:
                self.log("propose", f"locked on foreign block at height={height}, passing",
                         node=proposer_id)
                return
            block = lock
        else:
            block = self.make_block(node, node.pending_txs())
        self.register_proposal(node, block)
        self.log("propose",
                 f"height={block.height} hash={block.hash.hex()[:8]} txs={len(block.transactions)}",
                 node=proposer_id)
        self.broadcast(proposer_id, Proposal(self.round, block))

    def propose_equivocating(self, proposer_id: int) -> None:
        node = self.nodes[proposer_id]
        height = node.tip_height + 1
        full = self.make_block(node, node.pending_txs())
        empty = self.make_block(node, ())
        if full.hash == empty.hash:  # no pending txs; nothing to equivocate with
            variants = [full]
        else:
            variants = [full, empty]
        self.log("propose", f"equivocating height={height} "
                 f"variants={','.join(b.hash.hex()[:8] for b in variants)}", node=proposer_id)
        split = self.rng.randrange(2)
        for idx, dest in enumerate(sorted(self.nodes)):
            block = variants[(idx + split) % len(variants)]
            self.register_proposal(node, block)
            self.send(proposer_id, dest, Proposal(self.round, block))

    def register_proposal(self, node: SimNode, block: Block) -> None:
        node.proposal_blocks[block.hash] = block
        votes = node.proposal_votes.setdefault(block.hash, {})
        vote = Vote.create(node.pair, node.id, block.hash, self.round)
        votes[node.id] = vote

    # -- message handling -----------------------------------------------------------

    def deliver(self, src: int, dest: int, message) -> None:
        if self.behavior(dest) in (Behavior.CRASHED, Behavior.PARTITIONED):
            return
        node = self.nodes[dest]
        behavior = self.behavior(dest)
        if isinstance(message, Proposal):
            self.on_proposal(node, src, message, behavior)
        elif isinstance(message, VoteMsg):
            self.on_vote(node, message)
        elif isinstance(message, Commit):
            self.on_commit(node, src, message)
        elif isinstance(message, TipAnnounce):
            if message.height > node.tip_height:
                self.send(dest, src, SyncRequest(node.tip_height + 1))
        elif isinstance(message, SyncRequest):
            blocks = tuple(b for b in node.chain.blocks if b.height >= message.from_height)
            if blocks:
                self.send(dest, src, SyncResponse(blocks))
        elif isinstance(message, SyncResponse):
            self.on_sync(node, message)

    def on_proposal(self, node: SimNode, src: int, message: Proposal, behavior: Behavior) -> None:
        if message.round != self.round:
            return
        block = message.block
        expected_leader = select_proposer(self.config, message.round)
        if src != expected_leader or block.proposer != expected_leader:
            self.log("vote", f"refused hash={block.hash.hex()[:8]} reason=wrong-leader",
                     node=node.id)
            return
        if block.height > node.tip_height + 1:
            self.send(node.id, src, SyncRequest(node.tip_height + 1))
            return
        if block.height <= node.tip_height:
            return
        try:
            node.chain.validate_proposal(block)
        except AidchainError as exc:
            self.log("vote", f"refused hash={block.hash.hex()[:8]} reason={exc.code}",
                     node=node.id)
            return
        lock = node.locks.get(block.height)
        if behavior is Behavior.HONEST and lock is not None and lock.hash != block.hash:
            self.log("vote", f"refused hash={block.hash.hex()[:8]} reason=locked-on-"
                     f"{lock.hash.hex()[:8]}", node=node.id)
            return
        if behavior is Behavior.HONEST:
            node.locks[block.height] = block
        vote = Vote.create(node.pair, node.id, block.hash, message.round)
        self.log("vote", f"hash={block.hash.hex()[:8]}", node=node.id)
        self.send(node.id, src, VoteMsg(message.round, vote, block.hash))

    def on_vote(self, node: SimNode, message: VoteMsg) -> None:
        if message.round != self.round or message.vote.round != message.round:
            return
        block = node.proposal_blocks.get(message.block_hash)
        if block is None:
            return
        vote = message.vote
        pubkey = self.params.authority_pubkey(vote.voter)
        if pubkey is None:
            return
        try:
            keys.verify(pubkey, vote_signing_bytes(message.block_hash, vote.round),
                        vote.signature)
        except BadSignature:
            return
        votes = node.proposal_votes.setdefault(message.block_hash, {})
        votes[vote.voter] = vote
        if len(votes) >= self.config.quorum and message.block_hash not in node.certified:
            node.certified.add(message.block_hash)
            certified = block.with_votes(votes.values())
            self.log("commit",
                     f"height={certified.height} hash={certified.hash.hex()[:8]} "
                     f"votes={len(certified.votes)}", node=node.id)
            self.broadcast(node.id, Commit(self.round, certified))
            self.apply_certificate(node, certified)

    def on_commit(self, node: SimNode, src: int, message: Commit) -> None:
        block = message.block
        if block.height <= node.tip_height:
            return
        if block.height > node.tip_height + 1:
            self.send(node.id, src, SyncRequest(node.tip_height + 1))
            return
        self.apply_certificate(node, block)

    def on_sync(self, node: SimNode, message: SyncResponse) -> None:
        for block in message.blocks:
            if block.height != node.tip_height + 1:
                continue
            if not block.votes:
                continue  # only certified blocks travel via sync
            self.apply_certificate(node, block, phase="sync")

    def apply_certificate(self, node: SimNode, block: Block, phase: str = "apply") -> None:
        if node.accept_certificate(block):
            self.log(phase, f"height={block.height} hash={block.hash.hex()[:8]}", node=node.id)
            self._round_commits.append((node.id, block))

    # -- the run ---------------------------------------------------------------------

    def run_round(self) -> RoundOutcome:
        self._round_commits = []
        proposer_id = select_proposer(self.config, self.round)
        start = self.round * self.config.round_duration
        end = start + self.config.round_duration
        self.tick = start
        self.start_round()
        proposal_seen = any(isinstance(m, Proposal) for _, _, _, _, m in self.queue)
        for self.tick in range(start, end):
            while self.queue and self.queue[0][0] <= self.tick:
                _, _, src, dest, message = heapq.heappop(self.queue)
                self.deliver(src, dest, message)

        committed_block = None
        for node_id, block in self._round_commits:
            rounds = {v.round for v in block.votes}
            if rounds == {self.round} and node_id in self.honest_now():
                committed_block = block
                break
        if committed_block is not None:
            outcome = RoundOutcome(self.round, committed_block)
            self.log("outcome", f"committed height={committed_block.height} "
                     f"hash={committed_block.hash.hex()[:8]}")
        elif not proposal_seen:
            outcome = RoundOutcome(self.round, None, "timeout")
            self.log("outcome", "skipped reason=timeout")
        else:
            outcome = RoundOutcome(self.round, None, "insufficient votes")
            self.log("outcome", "skipped reason=insufficient-votes")
        self.outcomes.append(outcome)
        self.round += 1
        return outcome

    def honest_now(self) -> set:
        return {aid for aid, _ in self.config.authorities
                if self.behavior(aid) is Behavior.HONEST}

    def all_work_committed(self) -> bool:
        want = {tx.hash for tx in self.workload}
        for aid, _ in self.config.authorities:
            if self.faults.ever_equivocates(aid):
                continue
            have = {tx.hash for b in self.nodes[aid].chain.blocks for tx in b.transactions}
            if not want <= have:
                return False
        return True

    def run(self) -> SimulationTrace:
        while self.round < self.max_rounds:
            self.run_round()
            if self.all_work_committed() and not self.queue:
                break
        honest_ids = {aid for aid, _ in self.config.authorities
                      if not self.faults.ever_equivocates(aid)}
        committed = {}
        final_heights = {}
        for aid in sorted(self.nodes):
            blocks = self.nodes[aid].chain.blocks
            committed[aid] = [(b.height, b.hash.hex()) for b in blocks]
            final_heights[aid] = blocks[-1].height
        for aid in sorted(self.nodes):
            root = self.nodes[aid].chain.tip.state_root.hex()
            self.lines.append(
                f"committed_height={final_heights[aid]} node={aid} state_root={root[:16]}"
            )
        return SimulationTrace(self.lines, committed, honest_ids, final_heights,
                               self.outcomes)


# ---- deterministic scenario material ----------------------------------------------


def derive_authority_pair(seed: int, authority_id: int) -> keys.KeyPair:
    material = keccak256(b"authority-key" + encode_u64(seed) + encode_u32(authority_id))
    return keys.KeyPair.from_seed(material)


def derive_organization_pair(seed: int) -> keys.KeyPair:
    return keys.KeyPair.from_seed(keccak256(b"organization-key" + encode_u64(seed)))


def synthetic_recipient(index: int) -> bytes:
    return keccak256(b"recipient" + encode_u32(index))[:20]


def build_workload(org_pair: keys.KeyPair, count: int) -> tuple:
    """Deterministic mixed workload, valid when applied in order."""
    txs = []
    recipients: list = []
    for i in range(count):
        step = i % 5
        if step == 0:
            call = ContractCall(kind=CallKind.ADD_FUNDS, amount=100 + i)
        elif step == 1:
            recipient = synthetic_recipient(i)
            recipients.append(recipient)
            call = ContractCall(kind=CallKind.ADD_RECIPIENT, recipient=recipient)
        elif step == 2:
            call = ContractCall(kind=CallKind.SEND_ALLOWANCE,
                                recipient=recipients[-1], amount=10)
        elif step == 3:
            call = ContractCall(kind=CallKind.REGISTER_BANK_ACCOUNT,
                                recipient=recipients[-1], account=f"SETTLE-{i:05d}")
        else:
            call = ContractCall(kind=CallKind.ADD_FUNDS, amount=50)
        txs.append(Transaction.create(org_pair, i, call))
    return tuple(txs)


def make_consortium(seed: int, n: int, round_duration: int = 8):
    """Keys, config and genesis parameters for an n-authority simulation."""
    pairs = {i: derive_authority_pair(seed, i) for i in range(n)}
    org_pair = derive_organization_pair(seed)
    config = AuthorityConfig(
        authorities=tuple((i, pairs[i].public_key) for i in range(n)),
        quorum=quorum_for(n),
        round_duration=round_duration,
    )
    params = GenesisParams(
        organization_pubkey=org_pair.public_key,
        authorities=config.authorities,
        quorum=config.quorum,
    )
    return pairs, org_pair, config, params


def simulate(config: AuthorityConfig, authority_pairs: dict, params: GenesisParams,
             workload, faults: FaultSchedule, seed: int, max_rounds: int) -> SimulationTrace:
    sim = Simulator(config, authority_pairs, params, workload, faults, seed, max_rounds)
    return sim.run()


# ---- scenario files -----------------------------------------------------------------


@dataclass
class Scenario:
    authorities: int = 4
    quorum: Optional[int] = None
    round_duration: int = 8
    seed: int = 0
    max_rounds: int = 20
    workload: int = 0
    faults: FaultSchedule = field(default_factory=FaultSchedule)

    def run(self) -> SimulationTrace:
        pairs, org_pair, config, params = make_consortium(
            self.seed, self.authorities, self.round_duration)
        if self.quorum is not None and self.quorum != config.quorum:
            raise ConfigInvalid(
                f"quorum {self.quorum} conflicts with floor(2n/3)+1 = {config.quorum}")
        workload = build_workload(org_pair, self.workload)
        return simulate(config, pairs, params, workload, self.faults,
                        self.seed, self.max_rounds)


_BEHAVIORS = {b.value: b for b in Behavior if b is not Behavior.HONEST}


def parse_scenario(text: str) -> Scenario:
    """One directive per line; '#' starts a comment.

    Directives: authorities N, quorum Q, round_duration T, seed S,
    max_rounds M, workload N, fault <id> <crash|equivocate|partition>
    rounds A-B.
    """
    scenario = Scenario()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        try:
            if head == "authorities":
                scenario.authorities = int(parts[1])
            elif head == "quorum":
                scenario.quorum = int(parts[1])
            elif head == "round_duration":
                scenario.round_duration = int(parts[1])
            elif head == "seed":
                scenario.seed = int(parts[1])
            elif head == "max_rounds":
                scenario.max_rounds = int(parts[1])
            elif head == "workload":
                scenario.workload = int(parts[1])
            elif head == "fault":
                if len(parts) != 5 or parts[3] != "rounds":
                    raise ValueError("want: fault <id> <kind> rounds A-B")
                behavior = _BEHAVIORS.get(parts[2])
                if behavior is None:
                    raise ValueError(f"unknown fault kind {parts[2]!r}")
                first, _, last = parts[4].partition("-")
                scenario.faults.add(int(parts[1]), behavior, int(first),
                                    int(last or first))
            else:
                raise ValueError(f"unknown directive {head!r}")
        except (ValueError, IndexError) as exc:
            raise ConfigInvalid(f"scenario line {lineno}: {exc}") from exc
    if scenario.authorities < 1:
        raise ConfigInvalid("need at least one authority")
    for aid, _, _, _ in scenario.faults.entries:
        if not 0 <= aid < scenario.authorities:
            raise ConfigInvalid(f"fault names unknown authority {aid}")
    return scenario
