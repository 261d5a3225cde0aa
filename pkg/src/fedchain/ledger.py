"""Single-writer hash-chained ledger: Merkle-rooted transactions, proof-of-work blocks.

Wire format (SHA-256 throughout, integers 8-byte big-endian):

* transaction: ``kind ‖ 0x00 ‖ round ‖ payload_digest ‖ timestamp ‖ actor``
* header: ``index ‖ prev_hash ‖ merkle_root ‖ timestamp ‖ nonce ‖ difficulty``
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

KINDS = ("model_update", "access_grant", "access_denial")
ZERO_HASH = bytes(32)
DEFAULT_DIFFICULTY = 8
_U64 = struct.Struct(">Q")


class LedgerError(ValueError):
    pass


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _u64(x: int, what: str) -> bytes:
    if isinstance(x, bool) or not isinstance(x, int) or not 0 <= x < 2 ** 64:
        raise LedgerError(f"{what} must be an unsigned 64-bit integer, got {x!r}")
    return _U64.pack(x)


@dataclass(frozen=True)
class Transaction:
    kind: str
    round: int
    payload_digest: bytes
    timestamp: int
    actor: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LedgerError(f"unknown transaction kind {self.kind!r}")
        if not isinstance(self.payload_digest, bytes) or len(self.payload_digest) != 32:
            raise LedgerError("payload_digest must be exactly 32 bytes")

    def canonical_bytes(self) -> bytes:
        return (self.kind.encode() + b"\x00" + _u64(self.round, "round") + self.payload_digest
                + _u64(self.timestamp, "timestamp") + self.actor.encode("utf-8"))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "round": self.round, "payload_digest": self.payload_digest.hex(),
                "timestamp": self.timestamp, "actor": self.actor}


def merkle_root(txs) -> bytes:
    """Pairwise SHA-256 tree over transaction leaves; an odd node is paired with itself."""
    if not txs:
        raise LedgerError("merkle root of an empty transaction list")
    level = [sha256(tx.canonical_bytes()) for tx in txs]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def header_bytes(index, prev_hash, root, timestamp, nonce, difficulty) -> bytes:
    return (_u64(index, "index") + prev_hash + root + _u64(timestamp, "timestamp")
            + _u64(nonce, "nonce") + _u64(difficulty, "difficulty"))


def leading_zero_bits(h: bytes) -> int:
    n = int.from_bytes(h, "big")
    return len(h) * 8 - n.bit_length()


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    merkle_root: bytes
    timestamp: int
    nonce: int
    difficulty: int
    transactions: tuple[Transaction, ...]
    block_hash: bytes

    def header(self) -> bytes:
        return header_bytes(self.index, self.prev_hash, self.merkle_root, self.timestamp, self.nonce, self.difficulty)

    def compute_hash(self) -> bytes:
        return sha256(self.header())

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prev_hash": self.prev_hash.hex(),
            "merkle_root": self.merkle_root.hex(),
            "timestamp": self.timestamp,
            "nonce": self.nonce,
            "difficulty": self.difficulty,
            "transactions": [t.to_dict() for t in self.transactions],
            "block_hash": self.block_hash.hex(),
        }


@dataclass(frozen=True)
class Chain:
    difficulty: int
    blocks: tuple[Block, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.blocks)

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    def transactions(self, kind: str | None = None) -> list[Transaction]:
        return [t for b in self.blocks for t in b.transactions if kind is None or t.kind == kind]


@dataclass(frozen=True)
class Verification:
    ok: bool
    reason: str | None = None
    block: int | None = None

    def __bool__(self):
        return self.ok


def mine_block(chain: Chain, txs, timestamp: int) -> Block:
    """Search nonces upward from zero until the header hash meets the chain difficulty."""
    txs = tuple(txs)
    if not txs:
        raise LedgerError("a block needs at least one transaction")
    if chain.blocks:
        index, prev = chain.head.index + 1, chain.head.block_hash
    else:
        index, prev = 0, ZERO_HASH
    root = merkle_root(txs)
    prefix = _u64(index, "index") + prev + root + _u64(timestamp, "timestamp")
    suffix = _u64(chain.difficulty, "difficulty")
    shift = 256 - chain.difficulty
    nonce = 0
    while True:
        h = sha256(prefix + _U64.pack(nonce) + suffix)
        if chain.difficulty == 0 or int.from_bytes(h, "big") >> shift == 0:
            return Block(index, prev, root, timestamp, nonce, chain.difficulty, txs, h)
        nonce += 1


def genesis_transaction() -> Transaction:
    return Transaction("model_update", 0, ZERO_HASH, 0, "genesis")


def new_chain(difficulty: int = DEFAULT_DIFFICULTY) -> Chain:
    if not 0 <= difficulty <= 256:
        raise LedgerError("difficulty must lie in [0, 256]")
    empty = Chain(difficulty)
    return Chain(difficulty, (mine_block(empty, [genesis_transaction()], 0),))


def verify_chain(chain: Chain) -> Verification:
    """Full structural check; never raises."""
    try:
        if not chain.blocks:
            return Verification(False, "chain has no genesis block", None)
        g = chain.blocks[0]
        if g.index != 0 or g.prev_hash != ZERO_HASH or g.transactions != (genesis_transaction(),) or g.timestamp != 0:
            return Verification(False, "genesis block is malformed", 0)
        prev = None
        for pos, b in enumerate(chain.blocks):
            if b.index != pos:
                return Verification(False, f"block at position {pos} has index {b.index}", pos)
            if prev is not None and b.prev_hash != prev.block_hash:
                return Verification(False, f"block {pos} does not link to block {pos - 1}", pos)
            if b.difficulty != chain.difficulty:
                return Verification(False, f"block {pos} mined at difficulty {b.difficulty}, chain requires {chain.difficulty}", pos)
            if not b.transactions:
                return Verification(False, f"block {pos} has no transactions", pos)
            if merkle_root(b.transactions) != b.merkle_root:
                return Verification(False, f"block {pos} merkle root does not match its transactions", pos)
            if b.compute_hash() != b.block_hash:
                return Verification(False, f"block {pos} hash does not match its header", pos)
            if leading_zero_bits(b.block_hash) < chain.difficulty:
                return Verification(False, f"block {pos} hash misses difficulty {chain.difficulty}", pos)
            prev = b
    except (LedgerError, TypeError, AttributeError, ValueError) as exc:
        return Verification(False, f"malformed chain: {exc}", None)
    return Verification(True)


def _require_valid(chain: Chain):
    v = verify_chain(chain)
    if not v:
        raise LedgerError(f"refusing to extend an invalid chain: {v.reason}")


def append_block(chain: Chain, txs, timestamp: int) -> Chain:
    _require_valid(chain)
    return replace(chain, blocks=chain.blocks + (mine_block(chain, txs, timestamp),))


def append_model_update(chain: Chain, round: int, weights_digest: bytes, timestamp: int,
                        actor: str = "server", client_digests=()) -> Chain:
    """Record a global model (plus, optionally, the client updates it was built from) in one block."""
    txs = [Transaction("model_update", round, weights_digest, timestamp, actor)]
    txs += [Transaction("model_update", round, d, timestamp, cid) for cid, d in client_digests]
    return append_block(chain, txs, timestamp)


def append_access_decision(chain: Chain, granted: bool, request_digest: bytes, requester: str,
                           timestamp: int, round: int = 0) -> Chain:
    kind = "access_grant" if granted else "access_denial"
    return append_block(chain, [Transaction(kind, round, request_digest, timestamp, requester)], timestamp)


# --------------------------------------------------------------------------
# persistence

def dumps(chain: Chain) -> str:
    return "".join(json.dumps(b.to_dict(), separators=(",", ":")) + "\n" for b in chain.blocks)


def _hex32(s, what) -> bytes:
    if not isinstance(s, str) or len(s) != 64 or s != s.lower():
        raise LedgerError(f"{what}: expected 64 lowercase hex digits")
    return bytes.fromhex(s)


def _int(x, what) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise LedgerError(f"{what}: expected an integer")
    return x


def _block_from_dict(d: dict) -> Block:
    txs = tuple(
        Transaction(t["kind"], _int(t["round"], "round"), _hex32(t["payload_digest"], "payload_digest"),
                    _int(t["timestamp"], "timestamp"), t["actor"])
        for t in d["transactions"])
    return Block(_int(d["index"], "index"), _hex32(d["prev_hash"], "prev_hash"),
                 _hex32(d["merkle_root"], "merkle_root"), _int(d["timestamp"], "timestamp"),
                 _int(d["nonce"], "nonce"), _int(d["difficulty"], "difficulty"), txs,
                 _hex32(d["block_hash"], "block_hash"))


def loads(text: str, difficulty: int | None = None) -> Chain:
    """Parse and re-verify a JSON-lines chain. Any non-canonical byte is rejected."""
    try:
        blocks = tuple(_block_from_dict(json.loads(line)) for line in text.split("\n")[:-1])
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError) as exc:
        raise LedgerError(f"unparseable chain record: {exc}") from exc
    if not blocks:
        raise LedgerError("empty chain file")
    chain = Chain(blocks[0].difficulty if difficulty is None else difficulty, blocks)
    if dumps(chain) != text:
        raise LedgerError("chain file is not in canonical form")
    v = verify_chain(chain)
    if not v:
        raise LedgerError(f"chain failed verification: {v.reason}")
    return chain


def save(chain: Chain, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps(chain), encoding="utf-8")
    return path


def load(path: str | Path, difficulty: int | None = None) -> Chain:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise LedgerError(f"{path}: not UTF-8") from exc
    return loads(text, difficulty)
