"""Command-line front end over a persisted chain directory.

The chain directory (``--chain`` or ``COLDCHAIN_DIR``) holds the genesis
config, the block file, the pending mempool and the default contract
address.  Every invocation takes a file lock, replays the persisted chain
into memory, applies the command and writes the chain back, so the CLI
adds no semantics over the library.

Exit codes: 0 success, 1 domain rejection/revert, 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
from filelock import FileLock

from . import identity, scenario as scenario_mod
from .crypto import Keypair, keccak256, parse_address, parse_hash32, to_hex
from .encoding import encode_args
from .edge import EdgeAggregator
from .ledger import (
    GasSchedule,
    LedgerNode,
    TransactionRejected,
    sign_transaction,
    verify_chain_file,
)
from .registry import OP_SIGNATURES

CHAIN_FILE = "chain.ndjson"
MEMPOOL_FILE = "mempool.ndjson"
CONFIG_FILE = "config.json"
CONTRACT_FILE = "contract.txt"
DEFAULT_GENESIS_TIME = 1_607_426_000


class CliState:
    def __init__(self, chain_dir: Path, key_file: str | None, as_json: bool,
                 auto_mine: bool):
        self.chain_dir = chain_dir
        self.key_file = key_file
        self.as_json = as_json
        self.auto_mine = auto_mine
        self.node: LedgerNode | None = None

    # -- persistence -------------------------------------------------------

    def config(self) -> dict:
        path = self.chain_dir / CONFIG_FILE
        if not path.exists():
            config = GasSchedule().as_dict()
            config["genesisTime"] = DEFAULT_GENESIS_TIME
            path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
        return json.loads(path.read_text())

    def open_node(self) -> LedgerNode:
        if self.node is not None:
            return self.node
        config = self.config()
        schedule = GasSchedule.from_dict(config)
        chain_path = self.chain_dir / CHAIN_FILE
        if chain_path.exists():
            self.node = LedgerNode.load(chain_path, schedule,
                                        self.chain_dir / MEMPOOL_FILE)
        else:
            self.node = LedgerNode(schedule,
                                   config.get("genesisTime", DEFAULT_GENESIS_TIME))
        return self.node

    def save(self) -> None:
        if self.node is None:
            return
        self.node.save_chain(self.chain_dir / CHAIN_FILE)
        self.node.save_mempool(self.chain_dir / MEMPOOL_FILE)

    def keypair(self) -> Keypair:
        if not self.key_file:
            raise click.UsageError("this command needs --key")
        return Keypair.load(self.key_file)

    def contract(self) -> bytes:
        path = self.chain_dir / CONTRACT_FILE
        if not path.exists():
            raise click.ClickException("no deployed contract (run `deploy` first)")
        return parse_address(path.read_text().strip())

    # -- output ------------------------------------------------------------

    def emit(self, payload: dict, human: str) -> None:
        if self.as_json:
            click.echo(json.dumps(payload, sort_keys=True))
        else:
            click.echo(human)

    # -- transaction plumbing ---------------------------------------------

    def send(self, keypair: Keypair, contract: bytes, op: str, values: list) -> bytes:
        node = self.open_node()
        args = encode_args(values, OP_SIGNATURES[op])
        tx = sign_transaction(keypair, contract, op, args,
                              node.next_nonce(keypair.address), node.schedule)
        node.submit(tx)
        if self.auto_mine:
            while node.mempool:
                node.mine_block()
        return tx.tx_hash


pass_state = click.make_pass_decorator(CliState)


@click.group()
@click.option("--chain", "chain_dir", envvar="COLDCHAIN_DIR", default="./chain",
              show_default=True, help="Chain directory (or COLDCHAIN_DIR).")
@click.option("--key", "key_file", default=None, help="Invoking actor's keypair file.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("--auto-mine", is_flag=True, help="Mine immediately after submitting.")
@click.pass_context
def main(ctx, chain_dir, key_file, as_json, auto_mine):
    """Deterministic cold-chain ledger and vaccine registry."""
    path = Path(chain_dir)
    path.mkdir(parents=True, exist_ok=True)
    ctx.obj = CliState(path, key_file, as_json, auto_mine)
    lock = FileLock(path / ".lock")
    lock.acquire()
    ctx.call_on_close(lock.release)


def _domain_guard(fn):
    """Map domain rejections to exit code 1."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (TransactionRejected, ValueError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@main.command()
@click.option("--out", required=True, type=click.Path(), help="Keypair file to write.")
@pass_state
def keygen(state: CliState, out):
    """Generate a signing keypair."""
    kp = Keypair.generate()
    kp.save(out)
    state.emit({"address": to_hex(kp.address), "file": out},
               f"address {to_hex(kp.address)} written to {out}")


@main.command()
@pass_state
@_domain_guard
def deploy(state: CliState):
    """Deploy the vaccine registry; the signer becomes the issuer."""
    kp = state.keypair()
    node = state.open_node()
    nonce = node.next_nonce(kp.address)
    address = keccak256(kp.address + nonce.to_bytes(8, "big"))[-20:]
    tx_hash = state.send(kp, b"\x00" * 20, "deploy", [])
    (state.chain_dir / CONTRACT_FILE).write_text(to_hex(address) + "\n")
    state.save()
    state.emit({"contract": to_hex(address), "txHash": to_hex(tx_hash)},
               f"contract {to_hex(address)}\ntx {to_hex(tx_hash)}")


def _simple_tx_command(state: CliState, op: str, values: list) -> None:
    tx_hash = state.send(state.keypair(), state.contract(), op, values)
    state.save()
    state.emit({"txHash": to_hex(tx_hash)}, f"tx {to_hex(tx_hash)}")


@main.command("register-doctor")
@click.option("--doctor", required=True, help="Doctor address (0x...).")
@pass_state
@_domain_guard
def register_doctor(state: CliState, doctor):
    """Register a doctor (issuer only)."""
    _simple_tx_command(state, "registerDoctor", [parse_address(doctor)])


@main.command("register-admin")
@click.option("--admin", required=True, help="Medical unit admin address.")
@pass_state
@_domain_guard
def register_admin(state: CliState, admin):
    """Register a medical unit administrator (issuer only)."""
    _simple_tx_command(state, "registerMedicalUnitAdmin", [parse_address(admin)])


@main.command()
@click.option("--pi", required=True, help="Personal identification number.")
@click.option("--secret", default=None,
              help="Secret key text; generated when omitted.")
@pass_state
@_domain_guard
def subscribe(state: CliState, pi, secret):
    """Register as a vaccine beneficiary and print the QR payload."""
    kp = state.keypair()
    contract = state.contract()
    creds = identity.BeneficiaryCredentials.create(pi, secret)
    tx_hash = state.send(kp, contract, "registerBeneficiary", [creds.root])
    state.save()
    qr = identity.encode_beneficiary_qr(identity.BeneficiaryQrPayload(
        pi=pi, hash_secret=creds.hash_sk, contract=contract, tx_hash=tx_hash))
    secret_note = ""
    if secret is None:
        shown = creds.sk.hex() if isinstance(creds.sk, bytes) else creds.sk
        secret_note = f"\nsecret (store off-chain!): {shown}"
    state.emit(
        {"txHash": to_hex(tx_hash), "root": to_hex(creds.root),
         "qr": qr.decode("utf-8")},
        qr.decode("utf-8") + f"\ntx {to_hex(tx_hash)}" + secret_note,
    )


@main.command("register-rule")
@click.option("--name", required=True)
@click.option("--min", "min_value", required=True, type=int)
@click.option("--max", "max_value", required=True, type=int)
@click.option("--time-delta", required=True, type=int, help="Seconds.")
@pass_state
@_domain_guard
def register_rule(state: CliState, name, min_value, max_value, time_delta):
    """Register a safe-handling rule (issuer only)."""
    _simple_tx_command(state, "registerTrackingRule",
                       [name, min_value, max_value, time_delta])


@main.command("register-freezer")
@click.option("--freezer", required=True, help="Freezer address.")
@click.option("--rule", required=True)
@pass_state
@_domain_guard
def register_freezer(state: CliState, freezer, rule):
    """Bind a rule to a freezing device."""
    _simple_tx_command(state, "registerFreezerAndRules",
                       [parse_address(freezer), rule])


@main.command("register-lot")
@click.option("--lot", required=True, help="Lot id (0x... 32 bytes).")
@click.option("--samples", required=True, type=int)
@pass_state
@_domain_guard
def register_lot(state: CliState, lot, samples):
    """Register a vaccine lot (issuer only)."""
    _simple_tx_command(state, "registerVaccineLot", [parse_hash32(lot), samples])


@main.command("assign-freezer")
@click.option("--lot", required=True)
@click.option("--old", required=True, help="Previous freezer address.")
@click.option("--new", required=True, help="New freezer address.")
@pass_state
@_domain_guard
def assign_freezer(state: CliState, lot, old, new):
    """Hand a lot over to a freezer, restarting its time window."""
    _simple_tx_command(state, "updateVaccineFreezer",
                       [parse_hash32(lot), parse_address(old), parse_address(new)])


@main.command()
@click.option("--lot", required=True)
@click.option("--rule", required=True)
@click.option("--value", required=True, type=int)
@pass_state
@_domain_guard
def monitor(state: CliState, lot, rule, value):
    """Submit one monitored value (freezer key)."""
    _simple_tx_command(state, "monitor", [parse_hash32(lot), rule, value])


@main.command("ingest-readings")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True),
              help="CSV of freezer,lotId,rule,value,readAt rows.")
@pass_state
@_domain_guard
def ingest_readings(state: CliState, csv_path):
    """Run edge aggregation over a readings CSV and submit the extremes."""
    kp = state.keypair()
    node = state.open_node()
    agg = EdgeAggregator(node, state.contract(), {kp.address: kp})
    lines = Path(csv_path).read_text().splitlines()
    txs = agg.ingest_csv(lines)
    txs += agg.flush_all()
    if state.auto_mine:
        while node.mempool:
            node.mine_block()
    state.save()
    hashes = [to_hex(tx.tx_hash) for tx in txs]
    state.emit({"transactions": hashes},
               "\n".join(hashes) if hashes else "no transactions emitted")


@main.command("verify-patient")
@click.option("--hash-pi", required=True)
@click.option("--hash-secret", required=True)
@click.option("--address", required=True, help="Claimed beneficiary address.")
@pass_state
@_domain_guard
def verify_patient(state: CliState, hash_pi, hash_secret, address):
    """Read-only beneficiary identity check."""
    node = state.open_node()
    result = node.call(b"\x00" * 20, state.contract(), "checkBeneficiaryIdentity",
                       parse_hash32(hash_pi), parse_hash32(hash_secret),
                       parse_address(address))
    state.emit({"registered": result}, "true" if result else "false")


@main.command()
@click.option("--lot", required=True)
@pass_state
@_domain_guard
def history(state: CliState, lot):
    """Read-only monitoring history for a lot."""
    node = state.open_node()
    records = node.call(b"\x00" * 20, state.contract(), "checkVaccineLotHistory",
                        parse_hash32(lot))
    rows = [r.as_dict() for r in records]
    human = "\n".join(
        f"{r['freezer']} {r['rule']} value={r['value']} "
        f"t={r['timestamp']} valid={str(r['valid']).lower()}"
        for r in rows
    )
    state.emit({"history": rows}, human if rows else "empty history")


@main.command("administer-sign")
@click.option("--lot", required=True)
@click.option("--hash-pi", required=True)
@pass_state
@_domain_guard
def administer_sign(state: CliState, lot, hash_pi):
    """Sign a vaccine administration (doctor or beneficiary key)."""
    _simple_tx_command(state, "signAdministeredVaccine",
                       [parse_hash32(lot), parse_hash32(hash_pi)])


@main.command("report-side-effect")
@click.option("--pi", required=True, help="Personal identification number.")
@click.option("--secret", required=True, help="Off-chain secret text.")
@click.option("--lot", required=True)
@click.option("--description", required=True)
@pass_state
@_domain_guard
def report_side_effect(state: CliState, pi, secret, lot, description):
    """Self-report a side effect (beneficiary key)."""
    creds = identity.BeneficiaryCredentials.create(pi, secret)
    _simple_tx_command(state, "registerSideEffect",
                       [creds.hash_pi, creds.hash_sk, parse_hash32(lot),
                        description])


@main.command()
@click.option("--count", default=1, show_default=True, type=int)
@pass_state
@_domain_guard
def mine(state: CliState, count):
    """Mine blocks from the mempool."""
    node = state.open_node()
    mined = []
    for _ in range(count):
        block = node.mine_block()
        mined.append({"number": block.number, "blockHash": to_hex(block.block_hash),
                      "transactions": len(block.transactions),
                      "gasUsed": block.gas_used})
    state.save()
    human = "\n".join(
        f"block {b['number']} {b['blockHash']} txs={b['transactions']} "
        f"gas={b['gasUsed']}" for b in mined)
    state.emit({"blocks": mined}, human)


@main.command()
@click.option("--tx", "tx_hash", required=True)
@pass_state
def receipt(state: CliState, tx_hash):
    """Look up a mined transaction's receipt."""
    node = state.open_node()
    found = node.get_receipt(parse_hash32(tx_hash))
    if found is None:
        state.emit({"found": False}, "not-found")
        sys.exit(1)
    state.emit(found.as_dict(), json.dumps(found.as_dict(), indent=2))


@main.command("verify-chain")
@pass_state
def verify_chain(state: CliState):
    """Recompute all hashes of the persisted chain; name the corrupt block."""
    chain_path = state.chain_dir / CHAIN_FILE
    if not chain_path.exists():
        raise click.ClickException("no chain file")
    config = state.config()
    corrupt = verify_chain_file(chain_path, config.get("blockInterval"))
    if corrupt is None:
        state.emit({"ok": True}, "ok")
    else:
        state.emit({"ok": False, "corruptBlock": corrupt},
                   f"corrupt at block {corrupt}")
        sys.exit(1)


@main.command("run-scenario")
@click.option("--file", "scenario_file", type=click.Path(exists=True),
              help="Scenario JSON file.")
@click.option("--name", "bundled", default=None,
              help="Bundled scenario name (e.g. paper-4.1).")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the full replay report JSON here.")
@pass_state
@_domain_guard
def run_scenario(state: CliState, scenario_file, bundled, out_path):
    """Replay a scenario end to end on a fresh in-memory ledger."""
    if (scenario_file is None) == (bundled is None):
        raise click.UsageError("pass exactly one of --file or --name")
    if bundled is not None:
        scenario = scenario_mod.load_bundled_scenario(bundled)
    else:
        scenario = scenario_mod.load_scenario(scenario_file)
    report, _node = scenario_mod.run_scenario(scenario)
    if out_path:
        scenario_mod.emit_report(report, out_path)
    summary = {
        "scenario": report.scenario,
        "status": report.status,
        "operations": len(report.operations),
        "telemetry": len(report.telemetry),
        "calls": len(report.calls),
        "totalGas": report.total_gas,
        "finalLots": report.final_lots,
    }
    state.emit(summary, json.dumps(summary, indent=2))
    if report.status != "ok":
        sys.exit(1)


@main.command()
@click.option("--max", "max_freezers", required=True, type=int)
@click.option("--step", required=True, type=int)
@click.option("--monitor-gas", default=140_000, show_default=True, type=int)
@click.option("--out", "out_path", type=click.Path(), default=None)
@pass_state
@_domain_guard
def throughput(state: CliState, max_freezers, step, monitor_gas, out_path):
    """Analytic mining-time curve for the monitoring workload."""
    config = state.config()
    points = scenario_mod.throughput_curve(
        max_freezers, step, monitor_gas,
        block_gas_limit=config.get("blockGasLimit", 12_000_000),
        block_interval=config.get("blockInterval", 15),
    )
    csv_text = scenario_mod.curve_to_csv(points)
    if out_path:
        Path(out_path).write_text(csv_text)
    click.echo(csv_text, nl=False)


if __name__ == "__main__":
    main()
