"""The vaccine registry contract: a deterministic state machine.

All mutating operations run inside mined transactions; `sender` is the
verified transaction signer and `now` is the containing block's timestamp.
Operations validate every precondition before touching state, so a revert
leaves the state bit-identical (no snapshot/rollback machinery needed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .crypto import keccak256, to_hex
from .encoding import decode_args

MAX_SIDE_EFFECT_BYTES = 1024

ROLE_DOCTOR = "DOCTOR"
ROLE_BENEFICIARY = "BENEFICIARY"

# Argument signatures, fixed because they feed the signed canonical
# encoding and thus the transaction hash.
OP_SIGNATURES: dict[str, tuple[str, ...]] = {
    "deploy": (),
    "registerDoctor": ("address",),
    "registerMedicalUnitAdmin": ("address",),
    "registerBeneficiary": ("hash32",),
    "registerTrackingRule": ("string", "int", "int", "uint"),
    "registerFreezerAndRules": ("address", "string"),
    "registerVaccineLot": ("hash32", "uint"),
    "updateVaccineFreezer": ("hash32", "address", "address"),
    "monitor": ("hash32", "string", "int"),
    "signAdministeredVaccine": ("hash32", "hash32"),
    "registerSideEffect": ("hash32", "hash32", "hash32", "string"),
}

CALL_SIGNATURES: dict[str, tuple[str, ...]] = {
    "checkBeneficiaryIdentity": ("hash32", "hash32", "address"),
    "checkVaccineLotHistory": ("hash32",),
}


class ContractRevert(Exception):
    """Raised by contract code; the transaction is mined but reverted."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class SafeHandlingRule:
    """Named (min, max, timeDelta) bound for a monitored quantity."""

    name: str
    min_value: int
    max_value: int
    time_delta: int  # seconds

    def validate(self) -> None:
        if self.min_value >= self.max_value:
            raise ContractRevert("invalid-rule")
        if self.time_delta <= 0:
            raise ContractRevert("invalid-rule")

    def value_in_bounds(self, value: int) -> bool:
        # strict inequalities on both sides
        return self.min_value < value < self.max_value

    def evaluate(self, value: int, elapsed: int) -> bool:
        return self.value_in_bounds(value) and elapsed <= self.time_delta


@dataclass(frozen=True)
class MonitoredRecord:
    """One telemetry evaluation appended to a lot's tamper-proof history."""

    freezer: bytes
    rule: str
    value: int
    timestamp: int
    valid: bool

    def as_dict(self) -> dict:
        return {
            "freezer": to_hex(self.freezer),
            "rule": self.rule,
            "value": self.value,
            "timestamp": self.timestamp,
            "valid": self.valid,
        }


EmitFn = Callable[[str, list], None]


def _noop_emit(name: str, args: list) -> None:
    pass


class VaccineRegistry:
    """Executable contract instance holding the whole registry world."""

    def __init__(self, address: bytes, issuer: bytes):
        self.address = address
        self.issuer = issuer
        self.doctors: set[bytes] = set()
        self.medical_unit_admins: set[bytes] = set()
        self.beneficiaries: set[bytes] = set()
        self.registered_requests: dict[bytes, bytes] = {}
        self.rules: dict[str, SafeHandlingRule] = {}
        self.freezer_lots: dict[tuple[bytes, bytes], bool] = {}
        self.freezer_registration_time: dict[tuple[bytes, bytes], int] = {}
        self.freezer_rules: dict[bytes, set[str]] = {}
        self.vaccine_lots: dict[bytes, int] = {}
        self.monitored_vaccines: dict[bytes, list[MonitoredRecord]] = {}
        self.administration_signatures: dict[tuple[bytes, bytes, str], bytes] = {}
        self.administrated_vaccines: dict[bytes, bytes] = {}
        self.side_effects: dict[tuple[bytes, bytes], str] = {}

    # -- modifiers ---------------------------------------------------------

    def _only_issuer(self, sender: bytes) -> None:
        if sender != self.issuer:
            raise ContractRevert("unauthorized")

    def _only_medical_managers(self, sender: bytes) -> None:
        # The issuer passes as well: the issuer-signed freezer assignment
        # would otherwise be impossible despite carrying this modifier.
        if sender != self.issuer and sender not in self.medical_unit_admins:
            raise ContractRevert("unauthorized")

    # -- dispatch ----------------------------------------------------------

    def execute(self, sender: bytes, op: str, args: bytes, now: int,
                emit: EmitFn = _noop_emit) -> None:
        """Run one mutating operation; raises ContractRevert on failure."""
        if op == "deploy":
            raise ContractRevert("already-deployed")
        signature = OP_SIGNATURES.get(op)
        if signature is None:
            raise ContractRevert("unknown-op")
        try:
            values = decode_args(args, signature)
        except ValueError:
            raise ContractRevert("malformed-args") from None
        handler = getattr(self, "_op_" + op)
        handler(sender, now, emit, *values)

    def call(self, op: str, *args):
        """Read-only query; mutates nothing and consumes no gas."""
        if op == "checkBeneficiaryIdentity":
            hash_pi, hash_secret, beneficiary = args
            root = keccak256(hash_pi + hash_secret)
            return self.registered_requests.get(root) == beneficiary
        if op == "checkVaccineLotHistory":
            (lot_id,) = args
            return list(self.monitored_vaccines.get(lot_id, []))
        raise ValueError(f"unknown call {op!r}")

    # -- operations --------------------------------------------------------

    def _op_registerDoctor(self, sender, now, emit, doctor: bytes) -> None:
        self._only_issuer(sender)
        self.doctors.add(doctor)

    def _op_registerMedicalUnitAdmin(self, sender, now, emit, admin: bytes) -> None:
        self._only_issuer(sender)
        self.medical_unit_admins.add(admin)

    def _op_registerBeneficiary(self, sender, now, emit, beneficiary_hash: bytes) -> None:
        bound = self.registered_requests.get(beneficiary_hash)
        if bound is not None and bound != sender:
            raise ContractRevert("duplicate-commitment")
        self.beneficiaries.add(sender)
        self.registered_requests[beneficiary_hash] = sender

    def _op_registerTrackingRule(self, sender, now, emit, name: str,
                                 min_value: int, max_value: int,
                                 time_delta: int) -> None:
        self._only_issuer(sender)
        rule = SafeHandlingRule(name, min_value, max_value, time_delta)
        rule.validate()
        self.rules[name] = rule  # re-registration overwrites

    def _op_registerFreezerAndRules(self, sender, now, emit, freezer: bytes,
                                    rule: str) -> None:
        self._only_medical_managers(sender)
        if rule not in self.rules:
            raise ContractRevert("unknown-rule")
        self.freezer_rules.setdefault(freezer, set()).add(rule)

    def _op_registerVaccineLot(self, sender, now, emit, lot_id: bytes,
                               samples: int) -> None:
        self._only_issuer(sender)
        if lot_id in self.vaccine_lots:
            raise ContractRevert("duplicate-lot")
        if samples < 1:
            raise ContractRevert("invalid-samples")
        self.vaccine_lots[lot_id] = samples

    def _op_updateVaccineFreezer(self, sender, now, emit, lot_id: bytes,
                                 old_freezer: bytes, new_freezer: bytes) -> None:
        self._only_medical_managers(sender)
        if lot_id not in self.vaccine_lots:
            raise ContractRevert("unknown-lot")
        self.freezer_lots.pop((old_freezer, lot_id), None)
        self.freezer_lots[(new_freezer, lot_id)] = True
        self.freezer_registration_time[(new_freezer, lot_id)] = now

    def _op_monitor(self, sender, now, emit, lot_id: bytes, rule_name: str,
                    value: int) -> None:
        if lot_id not in self.vaccine_lots:
            raise ContractRevert("unknown-lot")
        if (sender, lot_id) not in self.freezer_lots:
            raise ContractRevert("freezer-not-bound")
        rule = self.rules.get(rule_name)
        if rule is None:
            raise ContractRevert("unknown-rule")
        if rule_name not in self.freezer_rules.get(sender, ()):
            raise ContractRevert("rule-not-bound")
        elapsed = now - self.freezer_registration_time[(sender, lot_id)]
        valid = rule.evaluate(value, elapsed)
        record = MonitoredRecord(sender, rule_name, value, now, valid)
        self.monitored_vaccines.setdefault(lot_id, []).append(record)
        if not valid:
            emit("BrokenRule", [rule_name, to_hex(lot_id), str(value), str(now)])

    def _op_signAdministeredVaccine(self, sender, now, emit, lot_id: bytes,
                                    hash_pi: bytes) -> None:
        if sender in self.doctors:
            role = ROLE_DOCTOR
        elif sender in self.beneficiaries:
            role = ROLE_BENEFICIARY
        else:
            raise ContractRevert("unauthorized")
        remaining = self.vaccine_lots.get(lot_id)
        if remaining is None:
            raise ContractRevert("unknown-lot")
        if remaining < 1:
            raise ContractRevert("lot-exhausted")
        if hash_pi in self.administrated_vaccines:
            raise ContractRevert("already-administered")
        self.administration_signatures[(lot_id, hash_pi, role)] = sender
        doctor_signed = (lot_id, hash_pi, ROLE_DOCTOR) in self.administration_signatures
        beneficiary_signed = (
            (lot_id, hash_pi, ROLE_BENEFICIARY) in self.administration_signatures
        )
        if doctor_signed and beneficiary_signed:
            self.administrated_vaccines[hash_pi] = lot_id
            self.vaccine_lots[lot_id] = remaining - 1
            emit("VaccineAdministered", [to_hex(lot_id), to_hex(hash_pi)])

    def _op_registerSideEffect(self, sender, now, emit, hash_pi: bytes,
                               hash_secret: bytes, lot_id: bytes,
                               description: str) -> None:
        if not self.call("checkBeneficiaryIdentity", hash_pi, hash_secret, sender):
            raise ContractRevert("unauthorized")
        if self.administrated_vaccines.get(hash_pi) != lot_id:
            raise ContractRevert("not-administered")
        if len(description.encode("utf-8")) > MAX_SIDE_EFFECT_BYTES:
            raise ContractRevert("description-too-long")
        self.side_effects[(lot_id, hash_pi)] = description

    # -- introspection -----------------------------------------------------

    def state_dict(self) -> dict:
        """Canonical, JSON-safe view of the full state."""
        return {
            "issuer": to_hex(self.issuer),
            "doctors": sorted(to_hex(a) for a in self.doctors),
            "medicalUnitAdmins": sorted(to_hex(a) for a in self.medical_unit_admins),
            "beneficiaries": sorted(to_hex(a) for a in self.beneficiaries),
            "registeredRequests": {
                to_hex(h): to_hex(a) for h, a in sorted(self.registered_requests.items())
            },
            "rules": {
                name: {
                    "minValue": r.min_value,
                    "maxValue": r.max_value,
                    "timeDelta": r.time_delta,
                }
                for name, r in sorted(self.rules.items())
            },
            "freezerLots": sorted(
                [to_hex(f), to_hex(l)] for (f, l) in self.freezer_lots
            ),
            "freezerRegistrationTime": {
                to_hex(f) + "/" + to_hex(l): t
                for (f, l), t in sorted(self.freezer_registration_time.items())
            },
            "freezerRules": {
                to_hex(f): sorted(rules) for f, rules in sorted(self.freezer_rules.items())
            },
            "vaccineLots": {to_hex(l): n for l, n in sorted(self.vaccine_lots.items())},
            "monitoredVaccines": {
                to_hex(l): [r.as_dict() for r in records]
                for l, records in sorted(self.monitored_vaccines.items())
            },
            "administrationSignatures": {
                to_hex(l) + "/" + to_hex(h) + "/" + role: to_hex(a)
                for (l, h, role), a in sorted(self.administration_signatures.items())
            },
            "administratedVaccines": {
                to_hex(h): to_hex(l) for h, l in sorted(self.administrated_vaccines.items())
            },
            "sideEffects": {
                to_hex(l) + "/" + to_hex(h): s
                for (l, h), s in sorted(self.side_effects.items())
            },
        }

    def state_digest(self) -> bytes:
        from .encoding import canonical_json

        return keccak256(canonical_json(self.state_dict()).encode("utf-8"))
