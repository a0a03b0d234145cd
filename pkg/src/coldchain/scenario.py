"""Scenario ingestion, end-to-end replay and the throughput model.

A scenario is a JSON document declaring actors, rules, freezers and lots,
plus a timeline of logically-timestamped events.  Replay drives a fresh
ledger: an event at time t executes in the first block whose timestamp is
>= t, so the whole run is a pure function of the scenario file.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .crypto import Keypair, keccak256, parse_hash32, to_hex
from .edge import EdgeAggregator, SensorReading
from .encoding import canonical_json, encode_args
from .identity import BeneficiaryCredentials
from .ledger import GasSchedule, LedgerNode, SignedTransaction, sign_transaction
from .registry import OP_SIGNATURES

BUNDLED_SCENARIOS = {"paper-4.1": "paper41.json"}

_MUTATING_EVENTS = {
    "deploy", "register-doctor", "register-admin", "subscribe",
    "register-rule", "register-freezer", "register-lot", "assign-freezer",
    "administer-sign", "report-side-effect",
}
_TELEMETRY_EVENTS = {"reading", "flush"}
_CALL_EVENTS = {"check-identity", "check-history"}


class ScenarioError(ValueError):
    pass


def actor_keypair(name: str) -> Keypair:
    """Deterministic per-actor keypair so replays are byte-identical."""
    return Keypair.from_seed(keccak256(b"coldchain/actor:" + name.encode("utf-8")))


@dataclass(frozen=True)
class Scenario:
    name: str
    genesis: dict
    issuer: str
    doctors: tuple[str, ...]
    admins: tuple[str, ...]
    beneficiaries: dict[str, BeneficiaryCredentials]
    rules: dict[str, dict]
    freezers: dict[str, tuple[str, ...]]
    lots: dict[str, int]          # lot id hex -> samples
    edge_interval: int
    timeline: tuple[dict, ...]

    @property
    def actor_names(self) -> set[str]:
        return (
            {self.issuer}
            | set(self.doctors)
            | set(self.admins)
            | set(self.beneficiaries)
            | set(self.freezers)
        )


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ScenarioError(message)


def scenario_from_dict(data: dict) -> Scenario:
    actors = data.get("actors", {})
    beneficiaries = {}
    for entry in actors.get("beneficiaries", []):
        _require("name" in entry and "pi" in entry,
                 f"beneficiary entry missing name/pi: {entry!r}")
        beneficiaries[entry["name"]] = BeneficiaryCredentials.create(
            entry["pi"], entry.get("secret"))
    rules = {}
    for entry in data.get("rules", []):
        rules[entry["name"]] = {
            "minValue": int(entry["minValue"]),
            "maxValue": int(entry["maxValue"]),
            "timeDelta": int(entry["timeDelta"]),
        }
    freezers = {
        entry["name"]: tuple(entry.get("rules", []))
        for entry in data.get("freezers", [])
    }
    lots = {entry["id"]: int(entry["samples"]) for entry in data.get("lots", [])}

    scenario = Scenario(
        name=data.get("name", "unnamed"),
        genesis=data.get("genesis", {}),
        issuer=actors.get("issuer", "issuer"),
        doctors=tuple(actors.get("doctors", [])),
        admins=tuple(actors.get("admins", [])),
        beneficiaries=beneficiaries,
        rules=rules,
        freezers=freezers,
        lots=lots,
        edge_interval=int(data.get("edgeInterval", 3600)),
        timeline=tuple(data.get("timeline", [])),
    )
    _validate(scenario)
    return scenario


def _validate(s: Scenario) -> None:
    for name, bound in s.freezers.items():
        for rule in bound:
            _require(rule in s.rules, f"freezer {name!r} binds undeclared rule {rule!r}")
    for lot_hex in s.lots:
        parse_hash32(lot_hex)

    last_t = None
    for event in s.timeline:
        _require("t" in event and "op" in event, f"timeline event missing t/op: {event!r}")
        t, op = event["t"], event["op"]
        if last_t is not None:
            _require(t >= last_t, f"timeline timestamps decrease at {event!r}")
        last_t = t
        args = event.get("args", {})
        known = _MUTATING_EVENTS | _TELEMETRY_EVENTS | _CALL_EVENTS
        _require(op in known, f"unknown timeline op {op!r}")
        for key in ("by", "doctor", "admin", "freezer", "old", "new", "beneficiary"):
            if key in args:
                _require(args[key] in s.actor_names,
                         f"event {op!r} references undeclared actor {args[key]!r}")
        if "rule" in args:
            _require(args["rule"] in s.rules,
                     f"event {op!r} references undeclared rule {args['rule']!r}")
        if "lot" in args:
            _require(args["lot"] in s.lots,
                     f"event {op!r} references undeclared lot {args['lot']!r}")


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"cannot parse scenario file: {exc}") from None
    return scenario_from_dict(data)


def load_bundled_scenario(name: str) -> Scenario:
    _require(name in BUNDLED_SCENARIOS, f"no bundled scenario named {name!r}")
    resource = importlib.resources.files("coldchain.data") / BUNDLED_SCENARIOS[name]
    return scenario_from_dict(json.loads(resource.read_text()))


@dataclass
class ReplayReport:
    scenario: str
    status: str  # "ok" | "FAILED"
    failed_event: Optional[dict]
    operations: list[dict]
    telemetry: list[dict]
    calls: list[dict]
    final_lots: dict[str, int]
    histories: dict[str, list[dict]]
    total_gas: int
    state_digest: str

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "status": self.status,
            "failedEvent": self.failed_event,
            "operations": self.operations,
            "telemetry": self.telemetry,
            "calls": self.calls,
            "finalLots": self.final_lots,
            "histories": self.histories,
            "totalGas": self.total_gas,
            "stateDigest": self.state_digest,
        }

    def to_json(self) -> str:
        return canonical_json(self.as_dict())


class _Replay:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        schedule = GasSchedule.from_dict(scenario.genesis)
        self.node = LedgerNode(
            schedule=schedule,
            genesis_time=scenario.genesis.get("genesisTime", 1_607_426_000),
        )
        self.keypairs = {name: actor_keypair(name) for name in scenario.actor_names}
        self.contract: Optional[bytes] = None
        self.edge: Optional[EdgeAggregator] = None
        # (event, tx, kind) with kind in {"operation", "telemetry"}
        self.tx_log: list[tuple[dict, SignedTransaction, str]] = []
        self.calls: list[dict] = []

    def _kp(self, name: str) -> Keypair:
        return self.keypairs[name]

    def _submit(self, event: dict, signer: str, op: str, values: list,
                kind: str = "operation") -> None:
        keypair = self._kp(signer)
        args = encode_args(values, OP_SIGNATURES[op])
        contract = self.contract if op != "deploy" else b"\x00" * 20
        if contract is None:
            raise ScenarioError(f"event {event!r} before deploy")
        tx = sign_transaction(keypair, contract, op, args,
                              self.node.next_nonce(keypair.address),
                              self.node.schedule)
        self.node.submit(tx)
        self.tx_log.append((event, tx, kind))

    def _advance_clock(self, t: int) -> None:
        while self.node.next_block_timestamp < t:
            self.node.mine_block()

    def _drain(self) -> None:
        while self.node.mempool:
            self.node.mine_block()

    def run(self) -> ReplayReport:
        s = self.scenario
        for event in s.timeline:
            # timeline times are logical seconds relative to genesis
            self._advance_clock(self.node.genesis_time + event["t"])
            self._handle(event)
        self._drain()
        return self._report()

    def _handle(self, event: dict) -> None:
        op = event["op"]
        args = event.get("args", {})
        if op == "deploy":
            issuer_kp = self._kp(args.get("by", self.scenario.issuer))
            nonce = self.node.next_nonce(issuer_kp.address)
            self.contract = keccak256(
                issuer_kp.address + nonce.to_bytes(8, "big"))[-20:]
            self._submit(event, args.get("by", self.scenario.issuer), "deploy", [])
            self.edge = EdgeAggregator(
                self.node, self.contract,
                {self._kp(name).address: self._kp(name)
                 for name in self.scenario.freezers},
                interval_length=self.scenario.edge_interval,
            )
        elif op == "register-doctor":
            self._submit(event, args["by"], "registerDoctor",
                         [self._kp(args["doctor"]).address])
        elif op == "register-admin":
            self._submit(event, args["by"], "registerMedicalUnitAdmin",
                         [self._kp(args["admin"]).address])
        elif op == "subscribe":
            creds = self.scenario.beneficiaries[args["beneficiary"]]
            self._submit(event, args["beneficiary"], "registerBeneficiary",
                         [creds.root])
        elif op == "register-rule":
            rule = self.scenario.rules[args["rule"]]
            self._submit(event, args["by"], "registerTrackingRule",
                         [args["rule"], rule["minValue"], rule["maxValue"],
                          rule["timeDelta"]])
        elif op == "register-freezer":
            self._submit(event, args["by"], "registerFreezerAndRules",
                         [self._kp(args["freezer"]).address, args["rule"]])
        elif op == "register-lot":
            lot_hex = args["lot"]
            self._submit(event, args["by"], "registerVaccineLot",
                         [parse_hash32(lot_hex), self.scenario.lots[lot_hex]])
        elif op == "assign-freezer":
            self._submit(event, args["by"], "updateVaccineFreezer",
                         [parse_hash32(args["lot"]),
                          self._kp(args["old"]).address,
                          self._kp(args["new"]).address])
        elif op == "reading":
            if self.edge is None:
                raise ScenarioError("reading before deploy")
            reading = SensorReading(
                freezer=self._kp(args["freezer"]).address,
                lot_id=parse_hash32(args["lot"]),
                rule=args["rule"],
                value=int(args["value"]),
                read_at=event["t"],
            )
            for tx in self.edge.ingest(reading):
                self.tx_log.append((event, tx, "telemetry"))
        elif op == "flush":
            if self.edge is None:
                raise ScenarioError("flush before deploy")
            key = (self._kp(args["freezer"]).address,
                   parse_hash32(args["lot"]), args["rule"])
            for tx in self.edge.flush(key):
                self.tx_log.append((event, tx, "telemetry"))
        elif op == "administer-sign":
            creds = self.scenario.beneficiaries[args["beneficiary"]]
            self._submit(event, args["by"], "signAdministeredVaccine",
                         [parse_hash32(args["lot"]), creds.hash_pi])
        elif op == "report-side-effect":
            creds = self.scenario.beneficiaries[args["by"]]
            self._submit(event, args["by"], "registerSideEffect",
                         [creds.hash_pi, creds.hash_sk,
                          parse_hash32(args["lot"]), args["description"]])
        elif op == "check-identity":
            self._drain()
            creds = self.scenario.beneficiaries[args["beneficiary"]]
            result = self.node.call(
                self._kp(args["by"]).address, self.contract,
                "checkBeneficiaryIdentity", creds.hash_pi, creds.hash_sk,
                self._kp(args["beneficiary"]).address)
            self.calls.append({"t": event["t"], "op": op, "result": result})
        elif op == "check-history":
            self._drain()
            records = self.node.call(
                self._kp(args["by"]).address, self.contract,
                "checkVaccineLotHistory", parse_hash32(args["lot"]))
            self.calls.append({"t": event["t"], "op": op,
                               "result": [r.as_dict() for r in records]})
        else:
            raise ScenarioError(f"unknown timeline op {op!r}")

    def _report(self) -> ReplayReport:
        operations, telemetry = [], []
        status, failed_event = "ok", None
        total_gas = 0
        for event, tx, kind in self.tx_log:
            receipt = self.node.get_receipt(tx.tx_hash)
            entry = {
                "t": event["t"],
                "op": event["op"],
                "txOp": tx.op,
                "txHash": to_hex(tx.tx_hash),
                "status": receipt.status,
                "gasUsed": receipt.gas_used,
                "events": [[name, list(a)] for name, a in receipt.events],
            }
            if receipt.reason is not None:
                entry["reason"] = receipt.reason
            total_gas += receipt.gas_used
            (operations if kind == "operation" else telemetry).append(entry)
            if not receipt.success and status == "ok":
                status, failed_event = "FAILED", dict(event)

        final_lots, histories = {}, {}
        if self.contract is not None and self.contract in self.node.contracts:
            instance = self.node.contracts[self.contract]
            final_lots = {to_hex(l): n for l, n in sorted(instance.vaccine_lots.items())}
            histories = {
                to_hex(l): [r.as_dict() for r in records]
                for l, records in sorted(instance.monitored_vaccines.items())
            }
        return ReplayReport(
            scenario=self.scenario.name,
            status=status,
            failed_event=failed_event,
            operations=operations,
            telemetry=telemetry,
            calls=self.calls,
            final_lots=final_lots,
            histories=histories,
            total_gas=total_gas,
            state_digest=to_hex(self.node.state_digest()),
        )


def run_scenario(scenario: Scenario) -> tuple[ReplayReport, LedgerNode]:
    """Replay a scenario against a fresh ledger; returns report and node."""
    replay = _Replay(scenario)
    report = replay.run()
    return report, replay.node


# -- throughput model ------------------------------------------------------


@dataclass(frozen=True)
class ThroughputPoint:
    freezer_count: int
    tx_count: int
    blocks_needed: int
    mining_seconds: int


def tx_per_block(monitor_gas: int, block_gas_limit: int) -> int:
    if monitor_gas <= 0:
        raise ValueError("monitor gas must be positive")
    if monitor_gas > block_gas_limit:
        raise ValueError("monitor gas exceeds the block gas limit")
    return block_gas_limit // monitor_gas


def throughput_point(freezer_count: int, monitor_gas: int,
                     block_gas_limit: int = 12_000_000,
                     block_interval: int = 15) -> ThroughputPoint:
    per_block = tx_per_block(monitor_gas, block_gas_limit)
    tx_count = 2 * freezer_count  # min and max per device per interval
    blocks = math.ceil(tx_count / per_block)
    return ThroughputPoint(
        freezer_count=freezer_count,
        tx_count=tx_count,
        blocks_needed=blocks,
        mining_seconds=blocks * block_interval,
    )


def throughput_curve(max_freezers: int, step: int, monitor_gas: int = 140_000,
                     block_gas_limit: int = 12_000_000,
                     block_interval: int = 15) -> list[ThroughputPoint]:
    if max_freezers < 0 or step <= 0:
        raise ValueError("max_freezers must be >= 0 and step positive")
    counts = list(range(0, max_freezers + 1, step))
    if counts[-1] != max_freezers:
        counts.append(max_freezers)
    return [
        throughput_point(n, monitor_gas, block_gas_limit, block_interval)
        for n in counts
    ]


def curve_to_csv(points: list[ThroughputPoint]) -> str:
    lines = ["freezerCount,txCount,blocks,seconds"]
    lines += [
        f"{p.freezer_count},{p.tx_count},{p.blocks_needed},{p.mining_seconds}"
        for p in points
    ]
    return "\n".join(lines) + "\n"


def simulated_block_count(freezer_count: int, monitor_gas: int = 140_000,
                          block_gas_limit: int = 12_000_000,
                          block_interval: int = 15) -> int:
    """Mine a synthetic monitor mempool for real and count the blocks.

    Cross-checks the analytic curve: one freezer identity signs the
    2 * freezer_count transactions (packing depends only on gas, not on
    who signed), against a fully set-up registry so every monitor lands
    as a valid append.
    """
    ops = dict(GasSchedule().ops)
    ops["monitor"] = monitor_gas
    schedule = GasSchedule(ops=ops, block_gas_limit=block_gas_limit,
                           block_interval=block_interval)
    node = LedgerNode(schedule=schedule)
    issuer = actor_keypair("sim-issuer")
    freezer = actor_keypair("sim-freezer")
    lot = keccak256(b"sim-lot")
    rule = "sim-rule"

    def push(kp: Keypair, op: str, values: list) -> None:
        contract = b"\x00" * 20 if op == "deploy" else contract_addr
        tx = sign_transaction(kp, contract, op,
                              encode_args(values, OP_SIGNATURES[op]),
                              node.next_nonce(kp.address), schedule)
        node.submit(tx)

    contract_addr = keccak256(issuer.address + (0).to_bytes(8, "big"))[-20:]
    push(issuer, "deploy", [])
    # generous time window so validity never depends on mining progress
    push(issuer, "registerTrackingRule", [rule, -1000, 1000, 10**12])
    push(issuer, "registerFreezerAndRules", [freezer.address, rule])
    push(issuer, "registerVaccineLot", [lot, 1])
    push(issuer, "updateVaccineFreezer", [lot, freezer.address, freezer.address])
    while node.mempool:
        node.mine_block()

    monitor_args = encode_args([lot, rule, 0], OP_SIGNATURES["monitor"])
    nonce = node.next_nonce(freezer.address)
    for i in range(2 * freezer_count):
        tx = sign_transaction(freezer, contract_addr, "monitor", monitor_args,
                              nonce + i, schedule)
        node.submit(tx)
    blocks = 0
    while node.mempool:
        node.mine_block()
        blocks += 1
    return blocks


def emit_report(obj: ReplayReport | list[ThroughputPoint], path: str | Path) -> None:
    """Write a replay report as canonical JSON or a curve as CSV."""
    path = Path(path)
    if isinstance(obj, ReplayReport):
        path.write_text(obj.to_json() + "\n")
    else:
        path.write_text(curve_to_csv(obj))
