"""Deterministic cold-chain ledger with a vaccine registry contract."""

from .crypto import Keypair, derive_address, keccak256, parse_address, parse_hash32, to_hex
from .edge import EdgeAggregator, SensorReading
from .identity import (
    BeneficiaryCredentials,
    BeneficiaryQrPayload,
    VaccineQrPayload,
    beneficiary_root,
    decode_beneficiary_qr,
    decode_vaccine_qr,
    encode_beneficiary_qr,
    encode_vaccine_qr,
    generate_secret,
)
from .ledger import (
    Block,
    GasSchedule,
    LedgerNode,
    Receipt,
    SignedTransaction,
    TransactionRejected,
    sign_transaction,
    verify_chain_file,
)
from .registry import (
    ContractRevert,
    MonitoredRecord,
    SafeHandlingRule,
    VaccineRegistry,
)
from .scenario import (
    ReplayReport,
    Scenario,
    ThroughputPoint,
    load_bundled_scenario,
    load_scenario,
    run_scenario,
    simulated_block_count,
    throughput_curve,
)

__all__ = [
    "BeneficiaryCredentials",
    "BeneficiaryQrPayload",
    "Block",
    "ContractRevert",
    "EdgeAggregator",
    "GasSchedule",
    "Keypair",
    "LedgerNode",
    "MonitoredRecord",
    "Receipt",
    "ReplayReport",
    "SafeHandlingRule",
    "Scenario",
    "SensorReading",
    "SignedTransaction",
    "ThroughputPoint",
    "TransactionRejected",
    "VaccineQrPayload",
    "VaccineRegistry",
    "beneficiary_root",
    "decode_beneficiary_qr",
    "decode_vaccine_qr",
    "derive_address",
    "encode_beneficiary_qr",
    "encode_vaccine_qr",
    "generate_secret",
    "keccak256",
    "load_bundled_scenario",
    "load_scenario",
    "parse_address",
    "parse_hash32",
    "run_scenario",
    "sign_transaction",
    "simulated_block_count",
    "throughput_curve",
    "to_hex",
    "verify_chain_file",
]

__version__ = "0.1.0"
