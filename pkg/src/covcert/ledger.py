"""Replicated append-only consortium ledger with Proof-of-Authority blocks.

Entries carry only a certificate DID and a 32-byte digest; no personal
data ever reaches the chain. Authorities take turns producing blocks
(height mod authority-set-size). The inter-node network is simulated
message passing with configurable delay; each node serializes writes
behind its own lock while lookups read only confirmed state.
"""

from __future__ import annotations

import dataclasses
import json
import random
import struct
import threading
import time
from dataclasses import dataclass, field

from . import crypto
from .crypto import KeyPair
from .errors import DuplicateAnchor, NotFound, NotScheduled, Pending

GENESIS_PARENT = b"\x00" * 32
DEFAULT_BLOCK_CAP = 256

# fixture authority names mirroring a five-member consortium
DEFAULT_AUTHORITIES = ("openuni", "bt", "condatis", "inrupt", "chiba")


@dataclass(frozen=True)
class AnchorEntry:
    cert_id: str
    digest: bytes
    submitted_at: int

    def to_dict(self) -> dict:
        return {
            "cert_id": self.cert_id,
            "digest": self.digest.hex(),
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnchorEntry":
        return cls(d["cert_id"], bytes.fromhex(d["digest"]), d["submitted_at"])


@dataclass(frozen=True)
class Block:
    height: int
    parent_digest: bytes
    producer: str
    entries: tuple[AnchorEntry, ...]
    produced_at: int
    producer_signature: bytes = b""

    def unsigned_encoding(self) -> bytes:
        body = {
            "height": self.height,
            "parent_digest": self.parent_digest.hex(),
            "producer": self.producer,
            "entries": [e.to_dict() for e in self.entries],
            "produced_at": self.produced_at,
        }
        return json.dumps(body, separators=(",", ":")).encode("utf-8")

    def digest(self) -> bytes:
        return crypto.digest(self.unsigned_encoding())

    def to_dict(self) -> dict:
        d = json.loads(self.unsigned_encoding())
        d["producer_signature"] = self.producer_signature.hex()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(
            height=d["height"],
            parent_digest=bytes.fromhex(d["parent_digest"]),
            producer=d["producer"],
            entries=tuple(AnchorEntry.from_dict(e) for e in d["entries"]),
            produced_at=d["produced_at"],
            producer_signature=bytes.fromhex(d["producer_signature"]),
        )


@dataclass(frozen=True)
class Receipt:
    tx_id: str
    anchor_url: str


def make_genesis(chain_name: str, authorities: dict[str, bytes]) -> Block:
    """Genesis block: height 0, zero parent, authority set in the entries.

    The authority roster is recorded as pseudo-entries keyed by authority
    id so the chain is self-describing.
    """
    roster = tuple(
        AnchorEntry(cert_id=f"authority:{aid}", digest=crypto.digest(pub), submitted_at=0)
        for aid, pub in sorted(authorities.items())
    )
    return Block(
        height=0,
        parent_digest=GENESIS_PARENT,
        producer=chain_name,
        entries=roster,
        produced_at=0,
    )


class Network:
    """Simulated broadcast fabric with randomized delivery delays."""

    def __init__(self, rng: random.Random | None = None):
        self.nodes: list[Node] = []
        self._queue: list[tuple[float, int, Node, Block]] = []
        self._seq = 0
        self.rng = rng or random.Random()
        self.max_delay = 0.0

    def join(self, node: "Node") -> None:
        self.nodes.append(node)

    def broadcast_block(self, origin: "Node", block: Block) -> None:
        for peer in self.nodes:
            if peer is origin:
                continue
            delay = self.rng.uniform(0, self.max_delay) if self.max_delay else 0.0
            self._seq += 1
            self._queue.append((delay, self._seq, peer, block))

    def broadcast_entry(self, origin: "Node", entry: AnchorEntry) -> None:
        # tx gossip is delivered eagerly; only block delivery is delayed
        for peer in self.nodes:
            if peer is not origin:
                peer.admit_entry(entry)

    def deliver_all(self) -> None:
        """Flush queued block messages in (possibly reordered) delay order."""
        self._queue.sort(key=lambda m: (m[0], m[1]))
        pending, self._queue = self._queue, []
        for _, _, peer, block in pending:
            peer.receive_block(block)


class Node:
    """One consortium authority: chain replica, mempool, producer key."""

    def __init__(
        self,
        authority_id: str,
        keypair: KeyPair,
        genesis: Block,
        authorities: dict[str, bytes],
        network: Network | None = None,
        block_cap: int = DEFAULT_BLOCK_CAP,
    ):
        self.authority_id = authority_id
        self.keypair = keypair
        self.authorities = dict(authorities)
        self.schedule = sorted(self.authorities)
        self.chain: list[Block] = [genesis]
        self.chain_id = genesis.digest().hex()[:16]
        self.mempool: list[AnchorEntry] = []
        self.network = network
        self.block_cap = block_cap
        self._confirmed: dict[str, tuple[bytes, int]] = {}
        self._pending_ids: set[str] = set()
        self._holdback: dict[int, Block] = {}
        self._lock = threading.RLock()
        if network is not None:
            network.join(self)

    # -- submission ----------------------------------------------------

    def submit_anchor(self, cert_id: str, digest: bytes) -> Receipt:
        if len(digest) != 32:
            raise ValueError("anchor digest must be 32 bytes")
        with self._lock:
            if cert_id in self._confirmed or cert_id in self._pending_ids:
                raise DuplicateAnchor(f"anchor already recorded for {cert_id}")
            entry = AnchorEntry(cert_id=cert_id, digest=digest, submitted_at=int(time.time()))
            self.mempool.append(entry)
            self._pending_ids.add(cert_id)
        if self.network is not None:
            self.network.broadcast_entry(self, entry)
        tx_id = crypto.digest_hex(digest + cert_id.encode("utf-8"))[:16]
        return Receipt(tx_id=tx_id, anchor_url=f"anchor://{self.chain_id}/{cert_id}")

    def admit_entry(self, entry: AnchorEntry) -> None:
        with self._lock:
            if entry.cert_id in self._confirmed or entry.cert_id in self._pending_ids:
                return
            self.mempool.append(entry)
            self._pending_ids.add(entry.cert_id)

    # -- block production and replication ------------------------------

    def scheduled_producer(self, height: int) -> str:
        return self.schedule[height % len(self.schedule)]

    @property
    def tip(self) -> Block:
        return self.chain[-1]

    def produce_block(self) -> Block:
        with self._lock:
            height = self.tip.height + 1
            if self.scheduled_producer(height) != self.authority_id:
                raise NotScheduled(
                    f"{self.authority_id} is not the producer for height {height}"
                )
            batch = tuple(self.mempool[: self.block_cap])
            block = Block(
                height=height,
                parent_digest=self.tip.digest(),
                producer=self.authority_id,
                entries=batch,
                produced_at=int(time.time()),
            )
            signed = dataclasses.replace(
                block, producer_signature=self.keypair.sign(block.unsigned_encoding())
            )
            self._append(signed)
        if self.network is not None:
            self.network.broadcast_block(self, signed)
        return signed

    def _append(self, block: Block) -> None:
        self.chain.append(block)
        for entry in block.entries:
            self._confirmed[entry.cert_id] = (entry.digest, block.height)
            self._pending_ids.discard(entry.cert_id)
        included = {e.cert_id for e in block.entries}
        self.mempool = [e for e in self.mempool if e.cert_id not in included]

    def validate_block(self, block: Block) -> str | None:
        """Reject reason, or None when the block extends the local tip."""
        if block.height <= self.tip.height:
            return "StaleHeight"
        if block.height != self.tip.height + 1:
            return "FutureHeight"
        if block.parent_digest != self.tip.digest():
            return "BadParent"
        if block.producer != self.scheduled_producer(block.height):
            return "BadProducer"
        pub = self.authorities.get(block.producer)
        if pub is None or not crypto.verify_sig(
            pub, block.unsigned_encoding(), block.producer_signature
        ):
            return "BadSignature"
        return None

    def apply_block(self, block: Block) -> str | None:
        """Validate and append; returns None on accept, else the reject reason."""
        with self._lock:
            reason = self.validate_block(block)
            if reason is None:
                self._append(block)
            return reason

    def receive_block(self, block: Block) -> None:
        """Network delivery entry point; out-of-order blocks are held back."""
        with self._lock:
            if block.height <= self.tip.height:
                return
            if block.height > self.tip.height + 1:
                self._holdback[block.height] = block
                return
            if self.apply_block(block) is None:
                nxt = self._holdback.pop(self.tip.height + 1, None)
                while nxt is not None and self.apply_block(nxt) is None:
                    nxt = self._holdback.pop(self.tip.height + 1, None)

    # -- queries -------------------------------------------------------

    def lookup_anchor(self, ref: str) -> tuple[bytes, int]:
        """Resolve a cert_id or anchor:// URL to (digest, height)."""
        cert_id = ref.rsplit("/", 1)[-1] if ref.startswith("anchor://") else ref
        hit = self._confirmed.get(cert_id)
        if hit is not None:
            return hit
        if cert_id in self._pending_ids:
            raise Pending(f"anchor for {cert_id} awaits inclusion in a block")
        raise NotFound(f"no anchor recorded for {cert_id}")

    def verify_chain(self) -> bool:
        g = self.chain[0]
        if g.height != 0 or g.parent_digest != GENESIS_PARENT:
            return False
        for prev, block in zip(self.chain, self.chain[1:]):
            if block.height != prev.height + 1:
                return False
            if block.parent_digest != prev.digest():
                return False
            if block.producer != self.scheduled_producer(block.height):
                return False
            pub = self.authorities.get(block.producer)
            if pub is None or not crypto.verify_sig(
                pub, block.unsigned_encoding(), block.producer_signature
            ):
                return False
        return True

    # -- persistence ---------------------------------------------------

    def save_chain(self, path: str) -> None:
        """Append-only file of length-prefixed canonical block encodings."""
        with open(path, "wb") as fh:
            for block in self.chain:
                raw = json.dumps(block.to_dict(), separators=(",", ":")).encode("utf-8")
                fh.write(struct.pack(">I", len(raw)) + raw)

    def load_chain(self, path: str) -> None:
        blocks: list[Block] = []
        with open(path, "rb") as fh:
            while True:
                head = fh.read(4)
                if not head:
                    break
                (size,) = struct.unpack(">I", head)
                blocks.append(Block.from_dict(json.loads(fh.read(size))))
        with self._lock:
            self.chain = blocks[:1]
            self._confirmed = {}
            for block in blocks[1:]:
                self._append(block)


@dataclass
class Consortium:
    """A full in-process deployment: authority keys, nodes, shared network."""

    nodes: list[Node]
    network: Network
    keys: dict[str, KeyPair] = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        authorities: tuple[str, ...] = DEFAULT_AUTHORITIES,
        chain_name: str = "covcert-consortium",
        seed: int | None = None,
        max_delay: float = 0.0,
    ) -> "Consortium":
        rng = random.Random(seed)
        keys = {aid: crypto.generate_keypair() for aid in authorities}
        pubs = {aid: kp.public_key for aid, kp in keys.items()}
        genesis = make_genesis(chain_name, pubs)
        network = Network(rng=rng)
        network.max_delay = max_delay
        nodes = [Node(aid, keys[aid], genesis, pubs, network) for aid in sorted(authorities)]
        return cls(nodes=nodes, network=network, keys=keys)

    @property
    def entry_node(self) -> Node:
        # worst case topology: all transactions hit the same node
        return self.nodes[0]

    def produce_next(self) -> Block:
        """Have the scheduled authority produce the next block and replicate it."""
        height = self.entry_node.tip.height + 1
        producer_id = self.entry_node.scheduled_producer(height)
        producer = next(n for n in self.nodes if n.authority_id == producer_id)
        block = producer.produce_block()
        self.network.deliver_all()
        return block

    def settle(self) -> None:
        """Produce blocks until every mempool is drained."""
        while any(n.mempool for n in self.nodes):
            self.produce_next()


class BlockTimer:
    """Background round-robin producer driving a consortium in real time."""

    def __init__(self, consortium: Consortium, interval: float = 1.0):
        self.consortium = consortium
        self.interval = interval
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.wait(self.interval):
            self.consortium.produce_next()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
