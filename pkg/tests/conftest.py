import pytest

from coldchain.crypto import Keypair, keccak256
from coldchain.encoding import encode_args
from coldchain.ledger import GasSchedule, LedgerNode, sign_transaction
from coldchain.registry import OP_SIGNATURES

LOT_ID = bytes.fromhex(
    "d7adb300b4c0d0f79bbb9195e3f9513b49caf8d14383062b2032d5656b13c5b5")

TRANSPORT_RULE = ("transport-temperature", -80, -60, 864_000)
STORAGE_RULE = ("medicalunit-storage-temperature", 2, 8, 432_000)


def kp(name: str) -> Keypair:
    """Deterministic test keypair."""
    return Keypair.from_seed(keccak256(b"test-actor:" + name.encode()))


class World:
    """A node plus a deployed registry and the usual cast of actors."""

    def __init__(self):
        self.node = LedgerNode()
        self.issuer = kp("issuer")
        self.doctor = kp("doctor")
        self.admin = kp("admin")
        self.beneficiary = kp("beneficiary")
        self.transport_freezer = kp("transport-freezer")
        self.storage_freezer = kp("storage-freezer")
        self.contract = keccak256(
            self.issuer.address + (0).to_bytes(8, "big"))[-20:]
        self.send(self.issuer, "deploy", [])

    def send(self, keypair: Keypair, op: str, values: list, mine: bool = True):
        contract = b"\x00" * 20 if op == "deploy" else self.contract
        tx = sign_transaction(
            keypair, contract, op, encode_args(values, OP_SIGNATURES[op]),
            self.node.next_nonce(keypair.address), self.node.schedule)
        self.node.submit(tx)
        if mine:
            self.node.mine_block()
        return tx

    @property
    def registry(self):
        return self.node.contracts[self.contract]

    def register_actors(self):
        self.send(self.issuer, "registerDoctor", [self.doctor.address])
        self.send(self.issuer, "registerMedicalUnitAdmin", [self.admin.address])

    def register_rules(self):
        self.send(self.issuer, "registerTrackingRule", list(TRANSPORT_RULE))
        self.send(self.issuer, "registerTrackingRule", list(STORAGE_RULE))

    def register_freezers(self):
        self.send(self.issuer, "registerFreezerAndRules",
                  [self.transport_freezer.address, TRANSPORT_RULE[0]])
        self.send(self.issuer, "registerFreezerAndRules",
                  [self.storage_freezer.address, STORAGE_RULE[0]])

    def register_lot(self, samples: int = 200):
        self.send(self.issuer, "registerVaccineLot", [LOT_ID, samples])

    def assign_transport(self):
        self.send(self.issuer, "updateVaccineFreezer",
                  [LOT_ID, self.transport_freezer.address,
                   self.transport_freezer.address])

    def full_setup(self, samples: int = 200):
        self.register_actors()
        self.register_rules()
        self.register_freezers()
        self.register_lot(samples)
        self.assign_transport()


# Acceptance tests append their one-line verdicts here; the terminal
# summary hook prints them after the run, outside output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def world():
    return World()


@pytest.fixture
def ready_world():
    w = World()
    w.full_setup()
    return w
