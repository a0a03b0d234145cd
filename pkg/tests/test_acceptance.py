"""Acceptance gate: seven headline checks, one pass/fail line each.

Each test prints a single ``[acceptance] name: PASS|FAIL`` line on the
real stdout (bypassing capture) and enforces its runtime budget.
"""

import random
import time

from coldchain.crypto import keccak256
from coldchain.encoding import canonical_json, encode_args
from coldchain.identity import BeneficiaryCredentials
from coldchain.ledger import verify_chain_file
from coldchain.registry import ContractRevert, OP_SIGNATURES, VaccineRegistry
from coldchain.scenario import (
    load_bundled_scenario,
    run_scenario,
    simulated_block_count,
    throughput_curve,
    throughput_point,
)

import conftest
from conftest import LOT_ID, World, kp

LOT_HEX = "0x" + LOT_ID.hex()


def _line(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    text = f"[acceptance] {name}: {status}{suffix}"
    conftest.ACCEPTANCE_LINES.append(text)
    print(text, flush=True)


def _within(budget: float, started: float) -> float:
    elapsed = time.perf_counter() - started
    assert elapsed < budget, f"runtime {elapsed:.2f}s exceeds {budget}s budget"
    return elapsed


def execute(reg: VaccineRegistry, sender: bytes, op: str, values: list,
            now: int = 1_607_426_000):
    """Run an op directly on a registry; returns the revert reason or None."""
    try:
        reg.execute(sender, op, encode_args(values, OP_SIGNATURES[op]), now)
    except ContractRevert as exc:
        return exc.reason
    return None


def test_walkthrough_history_flags():
    started = time.perf_counter()
    report, _node = run_scenario(load_bundled_scenario("paper-4.1"))
    history = report.histories[LOT_HEX]
    ok = (
        report.status == "ok"
        and [(r["value"], r["valid"]) for r in history]
        == [(-70, True), (-55, False), (5, True), (10, False)]
    )
    elapsed = _within(1.0, started)
    _line("walkthrough monitoring history", ok, f"{elapsed:.2f}s")
    assert ok


def test_block_packing():
    started = time.perf_counter()
    world = World()
    world.full_setup()
    from coldchain.ledger import sign_transaction
    nonce = world.node.next_nonce(world.transport_freezer.address)
    args = encode_args([LOT_ID, "transport-temperature", -70],
                       OP_SIGNATURES["monitor"])
    for i in range(100):
        world.node.submit(sign_transaction(
            world.transport_freezer, world.contract, "monitor", args,
            nonce + i, world.node.schedule))
    block = world.node.mine_block()
    ok = len(block.transactions) == 85 and len(world.node.mempool) == 15
    elapsed = _within(1.0, started)
    _line("block packing 85/100 monitor txs", ok, f"{elapsed:.2f}s")
    assert ok


def test_scaling_anchor():
    started = time.perf_counter()
    point = throughput_point(10_000, 140_000)
    analytic_ok = (point.tx_count, point.blocks_needed,
                   point.mining_seconds) == (20_000, 236, 3_540)
    mined_blocks = simulated_block_count(10_000)
    ok = analytic_ok and mined_blocks == 236
    elapsed = _within(30.0, started)
    _line("scaling anchor 10k freezers -> 236 blocks", ok,
          f"mined {mined_blocks} blocks, {elapsed:.1f}s")
    assert ok


def test_curve_shape():
    started = time.perf_counter()
    points = throughput_curve(10_000, 1)
    seconds = [p.mining_seconds for p in points]
    deltas = {b - a for a, b in zip(seconds, seconds[1:])}
    ok = len(points) == 10_001 and deltas <= {0, 15}
    elapsed = _within(5.0, started)
    _line("mining-time curve nondecreasing in {0,15}s steps", ok,
          f"{elapsed:.2f}s")
    assert ok


def test_pipeline_end_to_end():
    started = time.perf_counter()
    report, node = run_scenario(load_bundled_scenario("paper-4.1"))
    schedule_total = sum(node.schedule.gas_for(tx.op)
                         for block in node.blocks
                         for tx in block.transactions)
    ok = (
        len(report.operations) == 13
        and all(e["status"] == "success" for e in report.operations)
        and [c["op"] for c in report.calls] == ["check-identity",
                                                "check-history"]
        and report.calls[0]["result"] is True
        and len(report.calls[1]["result"]) == 4
        and report.final_lots[LOT_HEX] == 199
        and report.total_gas == schedule_total
    )
    elapsed = _within(2.0, started)
    _line("end-to-end pipeline 13 ops, lot 199, gas total", ok,
          f"gas {report.total_gas}, {elapsed:.2f}s")
    assert ok


def _fuzz_registry(rng: random.Random):
    issuer, doctor, admin = kp("fz-issuer"), kp("fz-doctor"), kp("fz-admin")
    patient = kp("fz-patient")
    creds = BeneficiaryCredentials.create("fz-pi", "fz-secret")
    reg = VaccineRegistry(address=b"\x01" * 20, issuer=issuer.address)
    execute(reg, issuer.address, "registerDoctor", [doctor.address])
    execute(reg, issuer.address, "registerMedicalUnitAdmin", [admin.address])
    execute(reg, patient.address, "registerBeneficiary", [creds.root])
    execute(reg, issuer.address, "registerTrackingRule", ["base", -80, -60, 10**9])
    execute(reg, issuer.address, "registerVaccineLot", [LOT_ID, 1000])
    senders = [issuer, doctor, admin, patient] + [kp(f"fz-x{i}") for i in range(4)]
    return reg, issuer, senders, creds


def _fuzz_args(rng, reg, sender, op, senders, creds):
    pools = {
        "address": lambda: rng.choice(senders).address,
        "hash32": lambda: rng.choice(
            [LOT_ID, creds.hash_pi, creds.hash_sk, keccak256(b"junk")]),
        "string": lambda: rng.choice(["base", "other", "r2"]),
        "int": lambda: rng.randint(-100, 100),
        "uint": lambda: rng.randint(1, 10**6),
    }
    return [pools[kind]() for kind in OP_SIGNATURES[op]]


def _fuzz_allowed(reg, sender, op, values):
    if op in ("registerDoctor", "registerMedicalUnitAdmin",
              "registerTrackingRule", "registerVaccineLot"):
        return sender == reg.issuer
    if op in ("registerFreezerAndRules", "updateVaccineFreezer"):
        return sender == reg.issuer or sender in reg.medical_unit_admins
    if op == "registerBeneficiary":
        return True
    if op == "monitor":
        return (sender, values[0]) in reg.freezer_lots
    if op == "signAdministeredVaccine":
        return sender in reg.doctors or sender in reg.beneficiaries
    if op == "registerSideEffect":
        return reg.registered_requests.get(
            keccak256(values[0] + values[1])) == sender
    raise AssertionError(op)


def test_property_suites():
    started = time.perf_counter()
    rng = random.Random(20260825)
    ops = [op for op in OP_SIGNATURES if op != "deploy"]
    failures = []

    # 1. access-control fuzz plus revert atomicity over the same corpus
    reg, issuer, senders, creds = _fuzz_registry(rng)
    reverted = checked = 0
    for i in range(10_000):
        if i % 2_000 == 0 and i:
            reg, issuer, senders, creds = _fuzz_registry(rng)
        sender = rng.choice(senders).address
        op = rng.choice(ops)
        values = _fuzz_args(rng, reg, sender, op, senders, creds)
        allowed = _fuzz_allowed(reg, sender, op, values)
        before = canonical_json(reg.state_dict())
        reason = execute(reg, sender, op, values)
        if reason is None:
            checked += 1
            if not allowed:
                failures.append(f"unauthorized success: {op}")
                break
        else:
            reverted += 1
            if canonical_json(reg.state_dict()) != before:
                failures.append(f"revert mutated state: {op} ({reason})")
                break

    # 2. two-signature gate and lot conservation over random orderings
    for _ in range(1_000):
        issuer_kp, doctor_kp = kp("adm-issuer"), kp("adm-doctor")
        reg = VaccineRegistry(address=b"\x02" * 20, issuer=issuer_kp.address)
        execute(reg, issuer_kp.address, "registerDoctor", [doctor_kp.address])
        execute(reg, issuer_kp.address, "registerVaccineLot", [LOT_ID, 50])
        people = []
        events = []
        for i in range(3):
            person = kp(f"adm-person-{i}")
            person_creds = BeneficiaryCredentials.create(f"adm-pi-{i}", "s")
            execute(reg, person.address, "registerBeneficiary",
                    [person_creds.root])
            people.append((person, person_creds))
            if rng.random() < 0.8:
                events.append((person.address, person_creds.hash_pi))
            for _ in range(rng.randint(0, 2)):  # doctor may sign 0..2 times
                events.append((doctor_kp.address, person_creds.hash_pi))
        rng.shuffle(events)
        doctor_signed, person_signed = set(), set()
        for sender, hash_pi in events:
            execute(reg, sender, "signAdministeredVaccine", [LOT_ID, hash_pi])
            if sender == doctor_kp.address:
                doctor_signed.add(hash_pi)
            else:
                person_signed.add(hash_pi)
        expected = doctor_signed & person_signed
        if set(reg.administrated_vaccines) != expected or \
                reg.vaccine_lots[LOT_ID] != 50 - len(expected):
            failures.append("two-signature/conservation violation")
            break

    # 3. identity soundness
    reg = VaccineRegistry(address=b"\x03" * 20, issuer=kp("id-issuer").address)
    holder = kp("id-holder")
    execute(reg, holder.address, "registerBeneficiary", [creds.root])
    ok_id = reg.call("checkBeneficiaryIdentity", creds.hash_pi, creds.hash_sk,
                     holder.address) is True
    for _ in range(1_000):
        wrong = keccak256(rng.getrandbits(256).to_bytes(32, "big"))
        if reg.call("checkBeneficiaryIdentity", creds.hash_pi, wrong,
                    holder.address):
            ok_id = False
            break
    if not ok_id:
        failures.append("identity soundness violation")

    # 4. tamper evidence: random single-bit flips are always detected
    import tempfile
    from pathlib import Path
    world = World()
    world.register_actors()
    world.register_rules()
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "chain.ndjson"
        world.node.save_chain(path)
        original = path.read_bytes()
        assert verify_chain_file(path, 15) is None
        for _ in range(1_000):
            pos = rng.randrange(len(original))
            bit = 1 << rng.randrange(8)
            if original[pos] == ord("\n") and bit == 0:
                continue
            mutated = bytearray(original)
            mutated[pos] ^= bit
            path.write_bytes(bytes(mutated))
            if verify_chain_file(path, 15) is None:
                failures.append(f"undetected bit flip at byte {pos}")
                break

    # 5. monitoring purity: brute-force recomputation of every valid flag
    from coldchain.encoding import decode_args
    report, node = run_scenario(load_bundled_scenario("paper-4.1"))
    contract = next(iter(node.contracts))
    instance = node.contracts[contract]
    rules, reg_times, recomputed = {}, {}, {}
    for block in node.blocks:
        for tx in block.transactions:
            receipt = node.get_receipt(tx.tx_hash)
            if not receipt.success:
                continue
            values = decode_args(tx.args, OP_SIGNATURES[tx.op])
            if tx.op == "registerTrackingRule":
                rules[values[0]] = (values[1], values[2], values[3])
            elif tx.op == "updateVaccineFreezer":
                reg_times.pop((values[1], values[0]), None)
                reg_times[(values[2], values[0])] = block.timestamp
            elif tx.op == "monitor":
                lot, rule_name, value = values
                lo, hi, delta = rules[rule_name]
                elapsed_s = block.timestamp - reg_times[(tx.sender, lot)]
                valid = (lo < value < hi) and elapsed_s <= delta
                recomputed.setdefault(lot, []).append(valid)
    stored = {lot: [r.valid for r in records]
              for lot, records in instance.monitored_vaccines.items()}
    if stored != recomputed:
        failures.append("monitoring purity mismatch")

    ok = not failures and reverted > 0 and checked > 0
    elapsed = time.perf_counter() - started
    _line("property suites (access, signatures, identity, tamper, purity)",
          ok, f"{elapsed:.1f}s" + (f"; {failures[0]}" if failures else ""))
    assert ok, failures


def test_determinism():
    started = time.perf_counter()
    import tempfile
    from pathlib import Path
    scenario = load_bundled_scenario("paper-4.1")
    blobs, reports = [], []
    with tempfile.TemporaryDirectory() as tmp:
        for run in range(2):
            report, node = run_scenario(scenario)
            path = Path(tmp) / f"chain-{run}.ndjson"
            node.save_chain(path)
            blobs.append(path.read_bytes())
            reports.append(report.to_json())
    ok = blobs[0] == blobs[1] and reports[0] == reports[1]
    elapsed = time.perf_counter() - started
    _line("byte-identical replay determinism", ok, f"{elapsed:.2f}s")
    assert ok
