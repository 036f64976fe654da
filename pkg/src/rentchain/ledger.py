"""Deterministic simulation of a permissioned blockchain channel.

One channel, three organizations: two peer orgs (the default gives each two
peers, with only Org1 allowed to write) and an ordering org with three
orderers taking turns as round-robin leader. Transactions flow through the
execute/order/validate pipeline: peers simulate chaincode during endorsement
and sign the resulting read/write set, the ordering service cuts blocks, and
validation applies MVCC checks before committing write sets to a versioned
key-value world state. The block log is hash-chained, append-only, and
persisted as length-prefixed canonical records so it can be audited and
replayed offline.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional

from .canonical import b64decode, b64encode, canonical_bytes, digest, sha256_hex

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

VALID = "VALID"
POLICY_FAIL = "POLICY_FAIL"
MVCC_CONFLICT = "MVCC_CONFLICT"

GENESIS_PREV_HASH = "0" * 64


class LedgerError(Exception):
    code = "LEDGER_ERROR"


class UnknownOrg(LedgerError):
    code = "UNKNOWN_ORG"


class WritePolicyViolation(LedgerError):
    code = "WRITE_POLICY_VIOLATION"


class EmptyBatch(LedgerError):
    code = "EMPTY_BATCH"


class BatchTooLarge(LedgerError):
    code = "BATCH_TOO_LARGE"


class HeightMismatch(LedgerError):
    code = "HEIGHT_MISMATCH"


class CorruptChain(LedgerError):
    code = "CORRUPT_CHAIN"

    def __init__(self, message: str, block_number: Optional[int] = None):
        super().__init__(message)
        self.block_number = block_number


class LedgerUnavailable(LedgerError):
    code = "LEDGER_UNAVAILABLE"


@dataclass
class OrgConfig:
    org_id: str
    peers: list[str]


@dataclass
class OrderingConfig:
    org_id: str
    orderers: list[str]


@dataclass
class ChannelConfig:
    channel: str
    orgs: list[OrgConfig]
    ordering: OrderingConfig
    endorsement_policy: set[str]
    writer_orgs: set[str]
    max_block_envelopes: int = 10

    @classmethod
    def default(cls, channel: str = "rental-channel") -> "ChannelConfig":
        return cls(
            channel=channel,
            orgs=[
                OrgConfig("Org1", ["Org1Peer0", "Org1Peer1"]),
                OrgConfig("Org2", ["Org2Peer0", "Org2Peer1"]),
            ],
            ordering=OrderingConfig("Org3", ["Orderer0", "Orderer1", "Orderer2"]),
            endorsement_policy={"Org1"},
            writer_orgs={"Org1"},
        )

    def org(self, org_id: str) -> OrgConfig:
        for org in self.orgs:
            if org.org_id == org_id:
                return org
        raise UnknownOrg(f"unknown org: {org_id}")

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "orgs": [{"org_id": o.org_id, "peers": o.peers} for o in self.orgs],
            "ordering": {"org_id": self.ordering.org_id, "orderers": self.ordering.orderers},
            "endorsement_policy": sorted(self.endorsement_policy),
            "writer_orgs": sorted(self.writer_orgs),
            "max_block_envelopes": self.max_block_envelopes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelConfig":
        return cls(
            channel=d["channel"],
            orgs=[OrgConfig(o["org_id"], list(o["peers"])) for o in d["orgs"]],
            ordering=OrderingConfig(d["ordering"]["org_id"], list(d["ordering"]["orderers"])),
            endorsement_policy=set(d["endorsement_policy"]),
            writer_orgs=set(d["writer_orgs"]),
            max_block_envelopes=d.get("max_block_envelopes", 10),
        )


def peer_signing_key(channel: str, peer_id: str) -> Ed25519PrivateKey:
    # Simulation stand-in for per-peer MSP enrolment: keys are derived from
    # the channel name so independent processes verify the same signatures.
    seed = hashlib.sha256(f"endorser|{channel}|{peer_id}".encode()).digest()
    return Ed25519PrivateKey.from_private_bytes(seed)


def peer_verify_key(channel: str, peer_id: str) -> Ed25519PublicKey:
    return peer_signing_key(channel, peer_id).public_key()


@dataclass
class TransactionEnvelope:
    tx_id: str
    creator: str  # PEM certificate of the submitting identity
    submitting_org: str
    function: str
    args: list[str]
    timestamp: str  # ISO-8601, simulated time
    read_set: list[tuple[str, int]] = field(default_factory=list)
    write_set: list[tuple[str, Optional[str]]] = field(default_factory=list)
    endorsements: list[tuple[str, str]] = field(default_factory=list)  # (peer, sig b64)
    payload: Optional[str] = None  # endorsement response; never serialized or hashed

    def rw_digest(self) -> str:
        """Digest the endorsing peers sign: binds identity, call, and rw-set."""
        return digest(
            {
                "tx_id": self.tx_id,
                "creator": self.creator,
                "submitting_org": self.submitting_org,
                "function": self.function,
                "args": self.args,
                "timestamp": self.timestamp,
                "read_set": self.read_set,
                "write_set": self.write_set,
            }
        )

    def is_state_changing(self) -> bool:
        return bool(self.write_set)

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "creator": self.creator,
            "submitting_org": self.submitting_org,
            "function": self.function,
            "args": self.args,
            "timestamp": self.timestamp,
            "read_set": [[k, v] for k, v in self.read_set],
            "write_set": [[k, v] for k, v in self.write_set],
            "endorsements": [[p, s] for p, s in self.endorsements],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransactionEnvelope":
        return cls(
            tx_id=d["tx_id"],
            creator=d["creator"],
            submitting_org=d["submitting_org"],
            function=d["function"],
            args=list(d["args"]),
            timestamp=d["timestamp"],
            read_set=[(k, v) for k, v in d["read_set"]],
            write_set=[(k, v) for k, v in d["write_set"]],
            endorsements=[(p, s) for p, s in d["endorsements"]],
        )


@dataclass
class Block:
    number: int
    prev_hash: str
    data_hash: str
    orderer: str
    envelopes: list[TransactionEnvelope]
    validation_flags: list[str] = field(default_factory=list)
    config: Optional[dict] = None  # genesis only

    def header_digest(self) -> str:
        return digest(
            {
                "number": self.number,
                "prev_hash": self.prev_hash,
                "data_hash": self.data_hash,
                "orderer": self.orderer,
            }
        )

    def compute_data_hash(self) -> str:
        if self.config is not None:
            return digest(self.config)
        return digest([e.to_dict() for e in self.envelopes])

    def to_dict(self) -> dict:
        d = {
            "number": self.number,
            "prev_hash": self.prev_hash,
            "data_hash": self.data_hash,
            "orderer": self.orderer,
            "envelopes": [e.to_dict() for e in self.envelopes],
            "validation_flags": list(self.validation_flags),
        }
        if self.config is not None:
            d["config"] = self.config
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(
            number=d["number"],
            prev_hash=d["prev_hash"],
            data_hash=d["data_hash"],
            orderer=d["orderer"],
            envelopes=[TransactionEnvelope.from_dict(e) for e in d["envelopes"]],
            validation_flags=list(d["validation_flags"]),
            config=d.get("config"),
        )


class TxSimulator:
    """Chaincode stub used during endorsement.

    Reads come from a snapshot of the committed world state and are recorded
    with the version seen; writes are buffered into the write set. Reads of a
    key written earlier in the same simulation return the pending value and
    add nothing to the read set.
    """

    def __init__(self, snapshot: dict[str, tuple[str, int]], timestamp: datetime):
        self._snapshot = snapshot
        self.timestamp = timestamp
        self.read_set: list[tuple[str, int]] = []
        self.write_set: list[tuple[str, Optional[str]]] = []
        self._pending: dict[str, Optional[str]] = {}
        self._read_keys: set[str] = set()

    def get_state(self, key: str) -> Optional[str]:
        if key in self._pending:
            return self._pending[key]
        value, version = self._snapshot.get(key, (None, 0))
        if key not in self._read_keys:
            self._read_keys.add(key)
            self.read_set.append((key, version))
        return value

    def put_state(self, key: str, value: str) -> None:
        self._pending[key] = value
        self.write_set = [(k, v) for k, v in self.write_set if k != key]
        self.write_set.append((key, value))

    def delete_state(self, key: str) -> None:
        self._pending[key] = None
        self.write_set = [(k, v) for k, v in self.write_set if k != key]
        self.write_set.append((key, None))

    def get_range(self, prefix: str) -> list[tuple[str, str]]:
        """All (key, value) pairs whose key starts with prefix, sorted by key."""
        merged: dict[str, Optional[str]] = {
            k: v for k, (v, _) in self._snapshot.items() if k.startswith(prefix)
        }
        for k, v in self._pending.items():
            if k.startswith(prefix):
                merged[k] = v
        out = []
        for k in sorted(merged):
            if merged[k] is None:
                continue
            if k not in self._pending and k not in self._read_keys:
                self._read_keys.add(k)
                self.read_set.append((k, self._snapshot[k][1]))
            out.append((k, merged[k]))
        return out


class ChaincodeExecutor:
    """Interface the ledger uses to simulate chaincode during endorsement."""

    def invoke(self, function: str, args: list[str], stub: TxSimulator) -> str:
        raise NotImplementedError

    def is_read_only(self, function: str) -> bool:
        raise NotImplementedError


class Ledger:
    """Single-channel ledger: block log, world state, and the tx pipeline.

    Commits are serialized through one lock; queries read the current state
    mapping, which is swapped in atomically per block, so readers observe
    either the pre- or post-commit state and never a partial write.
    """

    def __init__(
        self,
        config: ChannelConfig,
        executor: Optional[ChaincodeExecutor] = None,
        log_path: Optional[Path] = None,
        clock: Optional[Callable[[], datetime]] = None,
    ):
        self.config = config
        self.executor = executor
        self.log_path = Path(log_path) if log_path else None
        self.clock = clock or (lambda: datetime(2024, 1, 1, tzinfo=timezone.utc))
        self.blocks: list[Block] = []
        self._entries: dict[str, tuple[str, int]] = {}
        self._commit_lock = threading.Lock()
        self._tx_counter = 0
        if self.log_path is not None and self.log_path.exists() and self.log_path.stat().st_size:
            self._load_log()
        else:
            genesis = Block(
                number=0,
                prev_hash=GENESIS_PREV_HASH,
                data_hash="",
                orderer=self.config.ordering.orderers[0],
                envelopes=[],
                validation_flags=[],
                config=self.config.to_dict(),
            )
            genesis.data_hash = genesis.compute_data_hash()
            self.blocks.append(genesis)
            self._persist_block(genesis)

    # -- transaction pipeline -------------------------------------------------

    def new_draft(
        self, creator: str, submitting_org: str, function: str, args: list[str]
    ) -> TransactionEnvelope:
        with self._commit_lock:
            self._tx_counter += 1
            seq = self._tx_counter
        tx_id = sha256_hex(canonical_bytes([seq, submitting_org, function, args]))
        return TransactionEnvelope(
            tx_id=tx_id,
            creator=creator,
            submitting_org=submitting_org,
            function=function,
            args=list(args),
            timestamp=self.clock().isoformat(),
        )

    def endorse(self, draft: TransactionEnvelope, org_id: str) -> TransactionEnvelope:
        """Simulate the function on every peer of org_id and collect signatures.

        All peers must produce identical read/write sets. Raises
        WritePolicyViolation when a state-changing function is submitted
        through an org without write permission; chaincode errors propagate.
        """
        if self.executor is None:
            raise LedgerError("no chaincode executor attached")
        org = self.config.org(org_id)
        read_only = self.executor.is_read_only(draft.function)
        if not read_only and org_id not in self.config.writer_orgs:
            raise WritePolicyViolation(
                f"{draft.function} is state-changing; org {org_id} is query-only"
            )
        snapshot = self._entries
        ts = datetime.fromisoformat(draft.timestamp)
        results = []
        for peer_id in org.peers:
            stub = TxSimulator(snapshot, ts)
            payload = self.executor.invoke(draft.function, draft.args, stub)
            results.append((peer_id, payload, stub.read_set, stub.write_set))
        baseline = results[0][1:]
        for peer_id, payload, reads, writes in results[1:]:
            if (payload, reads, writes) != baseline:
                raise LedgerError(f"non-deterministic simulation on {peer_id}")
        _, payload, reads, writes = results[0]
        draft.read_set = reads
        draft.write_set = [] if read_only else writes
        draft.payload = payload
        rw = draft.rw_digest().encode()
        for peer_id in org.peers:
            sig = peer_signing_key(self.config.channel, peer_id).sign(rw)
            draft.endorsements.append((peer_id, b64encode(sig)))
        return draft

    def order(self, pending: list[TransactionEnvelope]) -> Block:
        """Cut one block from the pending batch, preserving arrival order."""
        if not pending:
            raise EmptyBatch("no envelopes to order")
        if len(pending) > self.config.max_block_envelopes:
            raise BatchTooLarge(
                f"batch of {len(pending)} exceeds max {self.config.max_block_envelopes}"
            )
        for env in pending:
            if env.is_state_changing() and not env.endorsements:
                raise LedgerError(f"envelope {env.tx_id[:8]} not endorsed")
        number = self.blocks[-1].number + 1
        orderers = self.config.ordering.orderers
        block = Block(
            number=number,
            prev_hash=self.blocks[-1].header_digest(),
            data_hash="",
            orderer=orderers[number % len(orderers)],  # round-robin leader
            envelopes=list(pending),
        )
        block.data_hash = block.compute_data_hash()
        return block

    def validate_and_commit(self, block: Block) -> list[str]:
        """Validate each envelope, apply VALID write sets, append the block.

        Policy check: a state-changing envelope must come from a writer org
        and carry a verifying signature from every peer of every org in the
        endorsement policy. MVCC check: every read version must still match
        the state as of this envelope's turn. The block is appended with its
        flags regardless of how many envelopes failed.
        """
        with self._commit_lock:
            if block.number != self.blocks[-1].number + 1:
                raise HeightMismatch(
                    f"block {block.number} cannot follow height {self.blocks[-1].number}"
                )
            state = dict(self._entries)
            flags = []
            for env in block.envelopes:
                flag = validate_envelope(self.config, env, state)
                if flag == VALID:
                    apply_writes(env, state)
                flags.append(flag)
            block.validation_flags = flags
            self.blocks.append(block)
            self._entries = state
            self._persist_block(block)
            return flags

    # -- queries and audits ----------------------------------------------------

    def query_state(self, key: str) -> Optional[str]:
        entry = self._entries.get(key)
        return entry[0] if entry else None

    def snapshot(self) -> dict[str, tuple[str, int]]:
        return self._entries

    @property
    def height(self) -> int:
        return self.blocks[-1].number

    def verify_chain(self) -> tuple[bool, Optional[int]]:
        """True iff every block's prev/data hash verifies; else first bad number."""
        prev = GENESIS_PREV_HASH
        for block in self.blocks:
            if block.prev_hash != prev or block.data_hash != block.compute_data_hash():
                return False, block.number
            prev = block.header_digest()
        return True, None

    def replay(self) -> dict[str, tuple[str, int]]:
        """Rebuild the world state from the log alone.

        Re-derives every validation flag (policy and MVCC checks) instead of
        trusting the stored ones; a mismatch or a broken hash chain raises
        CorruptChain. The result must equal the live state.
        """
        ok, bad = self.verify_chain()
        if not ok:
            raise CorruptChain(f"hash chain broken at block {bad}", bad)
        return replay_blocks(self.config, self.blocks)

    def export_state(self) -> str:
        """Canonical JSON snapshot of the live world state for audits.

        Tombstoned (deleted) keys are omitted: they exist only in the log.
        """
        entries = {
            k: {"value": v, "version": ver}
            for k, (v, ver) in self._entries.items()
            if v is not None
        }
        return canonical_bytes({"channel": self.config.channel, "entries": entries}).decode()

    # -- persistence -----------------------------------------------------------

    def _persist_block(self, block: Block) -> None:
        if self.log_path is None:
            return
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        record = block.to_dict()
        record["record_digest"] = digest(block.to_dict())
        payload = canonical_bytes(record)
        with self.log_path.open("ab") as fh:
            fh.write(struct.pack(">I", len(payload)))
            fh.write(payload)

    def _load_log(self) -> None:
        self.blocks = list(read_block_log(self.log_path))
        loaded_config = self.blocks[0].config
        if loaded_config is not None:
            self.config = ChannelConfig.from_dict(loaded_config)
        self._entries = self.replay()
        self._tx_counter = sum(len(b.envelopes) for b in self.blocks)


def validate_envelope(config: ChannelConfig, env: TransactionEnvelope, state: dict) -> str:
    if env.is_state_changing():
        if env.submitting_org not in config.writer_orgs:
            return POLICY_FAIL
        if not endorsements_satisfy_policy(config, env):
            return POLICY_FAIL
    for key, version in env.read_set:
        current = state.get(key, (None, 0))[1]
        if current != version:
            return MVCC_CONFLICT
    return VALID


def endorsements_satisfy_policy(config: ChannelConfig, env: TransactionEnvelope) -> bool:
    sigs = dict(env.endorsements)
    rw = env.rw_digest().encode()
    for org_id in config.endorsement_policy:
        for peer_id in config.org(org_id).peers:
            sig = sigs.get(peer_id)
            if sig is None:
                return False
            try:
                peer_verify_key(config.channel, peer_id).verify(b64decode(sig), rw)
            except InvalidSignature:
                return False
    return True


def apply_writes(env: TransactionEnvelope, state: dict) -> None:
    # Deletions leave a (None, version) tombstone: versions must keep
    # increasing across delete/recreate so stale reads still conflict.
    for key, value in env.write_set:
        version = state.get(key, (None, 0))[1]
        state[key] = (value, version + 1)


def replay_blocks(config: ChannelConfig, blocks: list[Block]) -> dict[str, tuple[str, int]]:
    state: dict[str, tuple[str, int]] = {}
    for block in blocks[1:]:
        for env, stored_flag in zip(block.envelopes, block.validation_flags):
            flag = validate_envelope(config, env, state)
            if flag != stored_flag:
                raise CorruptChain(
                    f"flag mismatch in block {block.number}: {flag} != {stored_flag}",
                    block.number,
                )
            if flag == VALID:
                apply_writes(env, state)
    return state


def read_block_log(path: Path) -> Iterable[Block]:
    """Decode the length-prefixed records of an on-disk block log.

    Raises CorruptChain when a record is truncated, undecodable, or fails its
    per-record digest.
    """
    data = Path(path).read_bytes()
    offset = 0
    index = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise CorruptChain(f"truncated length prefix at record {index}", index)
        (length,) = struct.unpack_from(">I", data, offset)
        offset += 4
        raw = data[offset : offset + length]
        if len(raw) != length:
            raise CorruptChain(f"truncated record {index}", index)
        offset += length
        try:
            record = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise CorruptChain(f"undecodable record {index}: {exc}", index) from exc
        stored = record.pop("record_digest", None)
        if stored != digest(record):
            raise CorruptChain(f"record digest mismatch at block {index}", index)
        yield Block.from_dict(record)
        index += 1


def verify_log_file(path: Path) -> tuple[bool, Optional[int]]:
    """Offline chain verification for the `ledger verify` CLI."""
    try:
        blocks = list(read_block_log(path))
    except CorruptChain as exc:
        return False, exc.block_number
    prev = GENESIS_PREV_HASH
    for block in blocks:
        if block.prev_hash != prev or block.data_hash != block.compute_data_hash():
            return False, block.number
        prev = block.header_digest()
    return True, None


def replay_log_file(path: Path) -> str:
    """Offline world-state reconstruction for the `ledger replay` CLI."""
    blocks = list(read_block_log(path))
    if not blocks or blocks[0].config is None:
        raise CorruptChain("log has no genesis config", 0)
    config = ChannelConfig.from_dict(blocks[0].config)
    state = replay_blocks(config, blocks)
    entries = {
        k: {"value": v, "version": ver} for k, (v, ver) in state.items() if v is not None
    }
    return canonical_bytes({"channel": config.channel, "entries": entries}).decode()
