"""Edge pre-processing of sensor streams.

Raw readings are buffered per (freezer, lot, rule) stream and only the
interval's minimum and maximum reach the chain, as monitor transactions
signed with the freezer's keypair.  At most two transactions per stream
per interval; identical extremes collapse to one.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional

from .crypto import Keypair, parse_address, parse_hash32
from .encoding import encode_args
from .ledger import LedgerNode, SignedTransaction, sign_transaction
from .registry import OP_SIGNATURES

DEFAULT_INTERVAL = 3600  # seconds

StreamKey = tuple[bytes, bytes, str]  # (freezer, lot, rule)


class OutOfOrderReading(ValueError):
    pass


class MissingKeypair(KeyError):
    pass


@dataclass(frozen=True)
class SensorReading:
    freezer: bytes
    lot_id: bytes
    rule: str
    value: int
    read_at: int

    @property
    def key(self) -> StreamKey:
        return (self.freezer, self.lot_id, self.rule)


@dataclass
class IntervalBuffer:
    interval_start: int
    observed_min: int
    observed_max: int
    count: int

    def add(self, value: int) -> None:
        if self.count == 0:
            self.observed_min = self.observed_max = value
        else:
            self.observed_min = min(self.observed_min, value)
            self.observed_max = max(self.observed_max, value)
        self.count += 1


class EdgeAggregator:
    """Buffers readings and submits min/max monitor transactions."""

    def __init__(self, node: LedgerNode, contract: bytes,
                 keypairs: dict[bytes, Keypair],
                 interval_length: int = DEFAULT_INTERVAL):
        if interval_length <= 0:
            raise ValueError("interval length must be positive")
        self.node = node
        self.contract = contract
        self.keypairs = dict(keypairs)
        self.interval_length = interval_length
        self.buffers: dict[StreamKey, IntervalBuffer] = {}

    def _interval_start(self, read_at: int) -> int:
        return (read_at // self.interval_length) * self.interval_length

    def ingest(self, reading: SensorReading) -> list[SignedTransaction]:
        """Record one reading; returns transactions from any interval rollover."""
        buf = self.buffers.get(reading.key)
        flushed: list[SignedTransaction] = []
        if buf is not None and reading.read_at < buf.interval_start:
            raise OutOfOrderReading(
                f"reading at {reading.read_at} precedes interval start "
                f"{buf.interval_start}"
            )
        if buf is not None and reading.read_at >= buf.interval_start + self.interval_length:
            flushed = self.flush(reading.key)
            buf = None
        if buf is None:
            buf = IntervalBuffer(self._interval_start(reading.read_at), 0, 0, 0)
            self.buffers[reading.key] = buf
        buf.add(reading.value)
        return flushed

    def flush(self, key: StreamKey) -> list[SignedTransaction]:
        """Submit the buffered extremes (min first) and reset the stream."""
        buf = self.buffers.get(key)
        if buf is None or buf.count == 0:
            self.buffers.pop(key, None)
            return []
        freezer, lot_id, rule = key
        keypair = self.keypairs.get(freezer)
        if keypair is None:
            # buffer retained so a later retry can still flush
            raise MissingKeypair(f"no keypair for freezer {freezer.hex()}")
        values = [buf.observed_min]
        if buf.observed_max != buf.observed_min:
            values.append(buf.observed_max)
        txs = []
        for value in values:
            args = encode_args([lot_id, rule, value], OP_SIGNATURES["monitor"])
            tx = sign_transaction(keypair, self.contract, "monitor", args,
                                  self.node.next_nonce(freezer), self.node.schedule)
            self.node.submit(tx)
            txs.append(tx)
        del self.buffers[key]
        return txs

    def flush_all(self) -> list[SignedTransaction]:
        txs = []
        for key in sorted(self.buffers, key=lambda k: (k[0], k[1], k[2])):
            txs.extend(self.flush(key))
        return txs

    def ingest_csv(self, lines: Iterable[str]) -> list[SignedTransaction]:
        """Consume `freezer,lotId,rule,value,readAt` CSV rows."""
        txs = []
        for row in csv.reader(lines):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip().lower() == "freezer":  # optional header
                continue
            freezer, lot_hex, rule, value, read_at = [cell.strip() for cell in row]
            reading = SensorReading(
                freezer=parse_address(freezer),
                lot_id=parse_hash32(lot_hex),
                rule=rule,
                value=int(value),
                read_at=int(read_at),
            )
            txs.extend(self.ingest(reading))
        return txs
