"""Deterministic single-chain ledger.

One miner, no forks, no fees: gas is pure accounting.  Blocks advance a
simulated clock (genesisTime + number * blockInterval) and transactions
are packed strictly FIFO under the block gas limit.  Reverted transactions
still consume gas and occupy block space.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .crypto import (
    ADDRESS_LEN,
    HASH_LEN,
    Keypair,
    derive_address,
    keccak256,
    parse_hex,
    to_hex,
    verify_signature,
)
from .encoding import canonical_json, length_prefixed
from .registry import OP_SIGNATURES, ContractRevert, VaccineRegistry

ZERO_ADDRESS = b"\x00" * ADDRESS_LEN
ZERO_HASH = b"\x00" * HASH_LEN

DEFAULT_BLOCK_GAS_LIMIT = 12_000_000
DEFAULT_BLOCK_INTERVAL = 15
DEFAULT_GENESIS_TIME = 1_607_420_000

# One representative gas value per operation, taken from the reported
# receipts.  Where a receipt shows several values for the same operation
# the first one is used; the throughput model itself works with a single
# representative monitor cost of 140000.
DEFAULT_GAS = {
    "deploy": 2_327_309,
    "registerDoctor": 43_798,
    "registerMedicalUnitAdmin": 43_798,
    "registerBeneficiary": 84_808,
    "registerTrackingRule": 216_219,
    "registerFreezerAndRules": 46_581,
    "registerVaccineLot": 64_255,
    "updateVaccineFreezer": 68_106,
    "monitor": 140_000,
    "signAdministeredVaccine": 49_401,
    "registerSideEffect": 48_073,
}


class TransactionRejected(Exception):
    """Submission-time rejection; the mempool and state are untouched."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class UnknownOperation(ValueError):
    pass


@dataclass(frozen=True)
class GasSchedule:
    ops: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_GAS))
    block_gas_limit: int = DEFAULT_BLOCK_GAS_LIMIT
    block_interval: int = DEFAULT_BLOCK_INTERVAL

    def gas_for(self, op: str) -> int:
        try:
            return self.ops[op]
        except KeyError:
            raise UnknownOperation(f"no gas entry for operation {op!r}") from None

    def as_dict(self) -> dict:
        return {
            "gas": dict(sorted(self.ops.items())),
            "blockGasLimit": self.block_gas_limit,
            "blockInterval": self.block_interval,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GasSchedule":
        ops = dict(DEFAULT_GAS)
        ops.update(data.get("gas", {}))
        return cls(
            ops=ops,
            block_gas_limit=data.get("blockGasLimit", DEFAULT_BLOCK_GAS_LIMIT),
            block_interval=data.get("blockInterval", DEFAULT_BLOCK_INTERVAL),
        )


@dataclass(frozen=True)
class SignedTransaction:
    sender: bytes
    public: bytes
    contract: bytes  # ZERO_ADDRESS for deployment
    op: str
    args: bytes
    nonce: int
    gas: int
    signature: bytes
    tx_hash: bytes

    @staticmethod
    def signing_bytes(sender: bytes, contract: bytes, op: str, args: bytes,
                      nonce: int) -> bytes:
        return length_prefixed([
            sender,
            contract,
            op.encode("utf-8"),
            args,
            nonce.to_bytes(8, "big"),
        ])

    def message(self) -> bytes:
        return self.signing_bytes(self.sender, self.contract, self.op,
                                  self.args, self.nonce)

    def computed_hash(self) -> bytes:
        return keccak256(self.message() + length_prefixed([self.signature]))

    def as_dict(self) -> dict:
        return {
            "from": to_hex(self.sender),
            "public": to_hex(self.public),
            "contract": to_hex(self.contract),
            "op": self.op,
            "args": to_hex(self.args),
            "nonce": self.nonce,
            "gas": self.gas,
            "signature": to_hex(self.signature),
            "txHash": to_hex(self.tx_hash),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SignedTransaction":
        raw_args = data["args"]
        if not raw_args.startswith("0x"):
            raise ValueError("args must be 0x-prefixed hex")
        args = bytes.fromhex(raw_args[2:])
        return cls(
            sender=parse_hex(data["from"], ADDRESS_LEN),
            public=parse_hex(data["public"], 32),
            contract=parse_hex(data["contract"], ADDRESS_LEN),
            op=data["op"],
            args=args,
            nonce=int(data["nonce"]),
            gas=int(data["gas"]),
            signature=bytes.fromhex(data["signature"][2:]),
            tx_hash=parse_hex(data["txHash"], HASH_LEN),
        )


def sign_transaction(keypair: Keypair, contract: bytes, op: str, args: bytes,
                     nonce: int, schedule: GasSchedule) -> SignedTransaction:
    """Build and sign a transaction; gas comes from the schedule by name."""
    gas = schedule.gas_for(op)
    message = SignedTransaction.signing_bytes(keypair.address, contract, op,
                                              args, nonce)
    signature = keypair.sign(message)
    tx_hash = keccak256(message + length_prefixed([signature]))
    return SignedTransaction(
        sender=keypair.address,
        public=keypair.public,
        contract=contract,
        op=op,
        args=args,
        nonce=nonce,
        gas=gas,
        signature=signature,
        tx_hash=tx_hash,
    )


@dataclass(frozen=True)
class Receipt:
    tx_hash: bytes
    block_number: int
    gas_used: int
    status: str  # "success" | "reverted"
    reason: Optional[str] = None
    events: tuple = ()  # of (name, tuple of str args)

    @property
    def success(self) -> bool:
        return self.status == "success"

    def as_dict(self) -> dict:
        out = {
            "txHash": to_hex(self.tx_hash),
            "blockNumber": self.block_number,
            "gasUsed": self.gas_used,
            "status": self.status,
            "events": [[name, list(args)] for name, args in self.events],
        }
        if self.reason is not None:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class Block:
    number: int
    parent_hash: bytes
    timestamp: int
    transactions: tuple[SignedTransaction, ...]
    gas_used: int
    block_hash: bytes

    @staticmethod
    def compute_hash(number: int, parent_hash: bytes, timestamp: int,
                     tx_hashes: list[bytes]) -> bytes:
        return keccak256(length_prefixed(
            [number.to_bytes(8, "big"), parent_hash, timestamp.to_bytes(8, "big")]
            + list(tx_hashes)
        ))

    def as_dict(self) -> dict:
        return {
            "number": self.number,
            "parentHash": to_hex(self.parent_hash),
            "timestamp": self.timestamp,
            "blockHash": to_hex(self.block_hash),
            "gasUsed": self.gas_used,
            "transactions": [tx.as_dict() for tx in self.transactions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Block":
        return cls(
            number=int(data["number"]),
            parent_hash=parse_hex(data["parentHash"], HASH_LEN),
            timestamp=int(data["timestamp"]),
            transactions=tuple(
                SignedTransaction.from_dict(tx) for tx in data["transactions"]
            ),
            gas_used=int(data["gasUsed"]),
            block_hash=parse_hex(data["blockHash"], HASH_LEN),
        )


class LedgerNode:
    """Single-miner chain with mempool, contract execution and receipts.

    Submission is serialized behind one lock; mining and execution are
    strictly single-threaded and deterministic.
    """

    def __init__(self, schedule: Optional[GasSchedule] = None,
                 genesis_time: int = DEFAULT_GENESIS_TIME):
        self.schedule = schedule or GasSchedule()
        self.genesis_time = genesis_time
        self._lock = threading.Lock()
        genesis = Block(
            number=0,
            parent_hash=ZERO_HASH,
            timestamp=genesis_time,
            transactions=(),
            gas_used=0,
            block_hash=Block.compute_hash(0, ZERO_HASH, genesis_time, []),
        )
        self.blocks: list[Block] = [genesis]
        self.mempool: deque[SignedTransaction] = deque()
        self.receipts: dict[bytes, Receipt] = {}
        self.contracts: dict[bytes, VaccineRegistry] = {}
        self._mined_nonces: dict[bytes, int] = {}    # next expected mined nonce
        self._pending_nonces: dict[bytes, int] = {}  # next expected incl. mempool
        self._seen_hashes: set[bytes] = set()

    # -- submission --------------------------------------------------------

    def next_nonce(self, sender: bytes) -> int:
        """Next usable nonce for `sender`, counting queued transactions."""
        return self._pending_nonces.get(sender, 0)

    def submit(self, tx: SignedTransaction) -> None:
        """Validate and enqueue; raises TransactionRejected otherwise."""
        with self._lock:
            if tx.op not in self.schedule.ops:
                raise TransactionRejected("unknown-op")
            if tx.gas != self.schedule.gas_for(tx.op):
                raise TransactionRejected("bad-gas")
            if tx.gas > self.schedule.block_gas_limit:
                raise TransactionRejected("oversized")
            if tx.tx_hash in self._seen_hashes:
                raise TransactionRejected("duplicate")
            if derive_address(tx.public) != tx.sender:
                raise TransactionRejected("bad-signature")
            if not verify_signature(tx.public, tx.signature, tx.message()):
                raise TransactionRejected("bad-signature")
            if tx.computed_hash() != tx.tx_hash:
                raise TransactionRejected("bad-hash")
            expected = self._pending_nonces.get(tx.sender, 0)
            if tx.nonce != expected:
                raise TransactionRejected("bad-nonce")
            self._pending_nonces[tx.sender] = expected + 1
            self.mempool.append(tx)

    # -- mining ------------------------------------------------------------

    def mine_block(self) -> Block:
        """Pack FIFO under the gas limit, execute, append, return the block."""
        packed: list[SignedTransaction] = []
        gas_used = 0
        limit = self.schedule.block_gas_limit
        while self.mempool:
            tx = self.mempool[0]
            if gas_used + tx.gas > limit:
                break  # strict FIFO: the overflowing tx stays queued
            self.mempool.popleft()
            packed.append(tx)
            gas_used += tx.gas

        number = len(self.blocks)
        timestamp = self.genesis_time + number * self.schedule.block_interval
        parent = self.blocks[-1].block_hash
        for tx in packed:
            self._execute(tx, number, timestamp)
        block = Block(
            number=number,
            parent_hash=parent,
            timestamp=timestamp,
            transactions=tuple(packed),
            gas_used=gas_used,
            block_hash=Block.compute_hash(number, parent, timestamp,
                                          [tx.tx_hash for tx in packed]),
        )
        self.blocks.append(block)
        return block

    def _execute(self, tx: SignedTransaction, block_number: int, now: int) -> None:
        events: list[tuple[str, tuple]] = []

        def emit(name: str, args: list) -> None:
            events.append((name, tuple(args)))

        status, reason = "success", None
        try:
            if tx.nonce != self._mined_nonces.get(tx.sender, 0):
                raise ContractRevert("bad-nonce")
            if tx.op == "deploy":
                address = keccak256(tx.sender + tx.nonce.to_bytes(8, "big"))[-ADDRESS_LEN:]
                self.contracts[address] = VaccineRegistry(address, tx.sender)
                emit("Deployed", [to_hex(address)])
            else:
                contract = self.contracts.get(tx.contract)
                if contract is None:
                    raise ContractRevert("unknown-contract")
                contract.execute(tx.sender, tx.op, tx.args, now, emit)
        except ContractRevert as exc:
            status, reason = "reverted", exc.reason
            events = []
        self._mined_nonces[tx.sender] = self._mined_nonces.get(tx.sender, 0) + 1
        self._seen_hashes.add(tx.tx_hash)
        self.receipts[tx.tx_hash] = Receipt(
            tx_hash=tx.tx_hash,
            block_number=block_number,
            gas_used=tx.gas,
            status=status,
            reason=reason,
            events=tuple(events),
        )

    # -- queries -----------------------------------------------------------

    def call(self, sender: bytes, contract: bytes, op: str, *args):
        """Read-only evaluation; no gas, no receipt, no mutation."""
        instance = self.contracts.get(contract)
        if instance is None:
            raise ValueError("unknown contract")
        return instance.call(op, *args)

    def get_receipt(self, tx_hash: bytes) -> Optional[Receipt]:
        return self.receipts.get(tx_hash)

    @property
    def next_block_timestamp(self) -> int:
        return self.genesis_time + len(self.blocks) * self.schedule.block_interval

    def state_digest(self) -> bytes:
        snapshot = {
            to_hex(addr): contract.state_dict()
            for addr, contract in sorted(self.contracts.items())
        }
        return keccak256(canonical_json(snapshot).encode("utf-8"))

    def verify_chain(self) -> Optional[int]:
        """Recompute all hashes and linkage; None if ok, else first bad block."""
        return verify_blocks(self.blocks, self.genesis_time,
                             self.schedule.block_interval)

    # -- persistence -------------------------------------------------------

    def save_chain(self, path: str | Path) -> None:
        lines = [canonical_json(b.as_dict()) for b in self.blocks]
        Path(path).write_text("\n".join(lines) + "\n")

    def save_mempool(self, path: str | Path) -> None:
        lines = [canonical_json(tx.as_dict()) for tx in self.mempool]
        Path(path).write_text("".join(line + "\n" for line in lines))

    @classmethod
    def load(cls, chain_path: str | Path,
             schedule: Optional[GasSchedule] = None,
             mempool_path: str | Path | None = None) -> "LedgerNode":
        """Rebuild a node by replaying a persisted chain from genesis."""
        blocks = load_blocks(chain_path)
        if not blocks:
            raise ValueError("empty chain file")
        node = cls(schedule=schedule, genesis_time=blocks[0].timestamp)
        for block in blocks[1:]:
            for tx in block.transactions:
                node.mempool.append(tx)
                node._pending_nonces[tx.sender] = tx.nonce + 1
            mined = node.mine_block()
            if mined.block_hash != block.block_hash:
                raise ValueError(f"chain replay diverged at block {block.number}")
        if mempool_path is not None and Path(mempool_path).exists():
            for line in Path(mempool_path).read_text().splitlines():
                if line.strip():
                    node.submit(SignedTransaction.from_dict(json.loads(line)))
        return node


def load_blocks(path: str | Path) -> list[Block]:
    blocks = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            blocks.append(Block.from_dict(json.loads(line)))
    return blocks


def verify_blocks(blocks: list[Block], genesis_time: Optional[int] = None,
                  block_interval: Optional[int] = None) -> Optional[int]:
    """Tamper check: recompute every txHash and blockHash plus linkage.

    Returns None when intact, else the number of the first corrupt block.
    """
    if genesis_time is None and blocks:
        genesis_time = blocks[0].timestamp
    prev_hash = ZERO_HASH
    for i, block in enumerate(blocks):
        if block.number != i:
            return block.number
        if block.parent_hash != prev_hash:
            return block.number
        if block_interval is not None:
            if block.timestamp != genesis_time + i * block_interval:
                return block.number
        for tx in block.transactions:
            if tx.computed_hash() != tx.tx_hash:
                return block.number
            if derive_address(tx.public) != tx.sender:
                return block.number
            if not verify_signature(tx.public, tx.signature, tx.message()):
                return block.number
        expected = Block.compute_hash(block.number, block.parent_hash,
                                      block.timestamp,
                                      [tx.tx_hash for tx in block.transactions])
        if expected != block.block_hash:
            return block.number
        if block.gas_used != sum(tx.gas for tx in block.transactions):
            return block.number
        prev_hash = block.block_hash
    return None


def verify_chain_file(path: str | Path,
                      block_interval: Optional[int] = None) -> Optional[int]:
    try:
        lines = [line for line in Path(path).read_text().splitlines()
                 if line.strip()]
        blocks = []
        for i, line in enumerate(lines):
            block = Block.from_dict(json.loads(line))
            # the file must be in canonical form, so that every byte is
            # covered by the hash checks (e.g. no case-flipped hex digits)
            if canonical_json(block.as_dict()) != line:
                return block.number if block.number == i else i
            blocks.append(block)
    except (ValueError, KeyError, json.JSONDecodeError):
        return 0
    return verify_blocks(blocks, block_interval=block_interval)
