"""Off-chain beneficiary identity: commitments and QR payload codecs.

The registration commitment is a two-leaf Merkle tree: the root is the
keccak-256 of the concatenated leaf hashes.  The personal identification
number and the secret never appear on chain, only their hashes do.
"""

from __future__ import annotations

import secrets
import warnings
from dataclasses import dataclass

from .crypto import (
    ADDRESS_LEN,
    HASH_LEN,
    keccak256,
    parse_address,
    parse_hash32,
    to_hex,
)

SECRET_LEN = 32


class QrDecodeError(ValueError):
    pass


def generate_secret() -> bytes:
    """Fresh secret from the OS CSPRNG; stored off-chain only."""
    return secrets.token_bytes(SECRET_LEN)


def hash_text(text: str) -> bytes:
    """keccak256 of the UTF-8 bytes, no trailing delimiter."""
    return keccak256(text.encode("utf-8"))


def beneficiary_root(hash_pi: bytes, hash_sk: bytes) -> bytes:
    """Commitment root: keccak256 of the 64-byte concatenation."""
    if len(hash_pi) != HASH_LEN or len(hash_sk) != HASH_LEN:
        raise ValueError("commitment leaves must be 32 bytes each")
    return keccak256(hash_pi + hash_sk)


@dataclass(frozen=True)
class BeneficiaryCredentials:
    pi: str
    sk: str | bytes
    hash_pi: bytes
    hash_sk: bytes
    root: bytes

    @classmethod
    def create(cls, pi: str, sk: str | bytes | None = None) -> "BeneficiaryCredentials":
        if sk is None:
            sk = generate_secret()
        hash_pi = hash_text(pi)
        hash_sk = hash_text(sk) if isinstance(sk, str) else keccak256(sk)
        return cls(pi=pi, sk=sk, hash_pi=hash_pi, hash_sk=hash_sk,
                   root=beneficiary_root(hash_pi, hash_sk))


@dataclass(frozen=True)
class BeneficiaryQrPayload:
    pi: str
    hash_secret: bytes
    contract: bytes
    tx_hash: bytes


@dataclass(frozen=True)
class VaccineQrPayload:
    lot_id: bytes
    contract: bytes


def _encode_lines(pairs: list[tuple[str, str]]) -> bytes:
    return "\n".join(f"{key}:{value}" for key, value in pairs).encode("utf-8")


def _decode_lines(data: bytes, known_keys: tuple[str, ...]) -> dict[str, str]:
    fields: dict[str, str] = {}
    for line in data.decode("utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise QrDecodeError(f"malformed line {line!r}")
        if key not in known_keys:
            warnings.warn(f"ignoring unknown QR field {key!r}", stacklevel=3)
            continue
        fields[key] = value
    for key in known_keys:
        if key not in fields:
            raise QrDecodeError(f"missing field {key}")
    return fields


def encode_beneficiary_qr(payload: BeneficiaryQrPayload) -> bytes:
    return _encode_lines([
        ("PI", payload.pi),
        ("HASH_SECRET", to_hex(payload.hash_secret)),
        ("CONTRACT", to_hex(payload.contract)),
        ("TX_HASH", to_hex(payload.tx_hash)),
    ])


def decode_beneficiary_qr(data: bytes) -> BeneficiaryQrPayload:
    fields = _decode_lines(data, ("PI", "HASH_SECRET", "CONTRACT", "TX_HASH"))
    try:
        hash_secret = parse_hash32(fields["HASH_SECRET"])
    except ValueError:
        raise QrDecodeError("malformed hex in field HASH_SECRET") from None
    try:
        contract = parse_address(fields["CONTRACT"])
    except ValueError:
        raise QrDecodeError("malformed hex in field CONTRACT") from None
    try:
        tx_hash = parse_hash32(fields["TX_HASH"])
    except ValueError:
        raise QrDecodeError("malformed hex in field TX_HASH") from None
    return BeneficiaryQrPayload(pi=fields["PI"], hash_secret=hash_secret,
                                contract=contract, tx_hash=tx_hash)


def encode_vaccine_qr(payload: VaccineQrPayload) -> bytes:
    return _encode_lines([
        ("V_ID", to_hex(payload.lot_id)),
        ("CONTRACT", to_hex(payload.contract)),
    ])


def decode_vaccine_qr(data: bytes) -> VaccineQrPayload:
    fields = _decode_lines(data, ("V_ID", "CONTRACT"))
    try:
        lot_id = parse_hash32(fields["V_ID"])
    except ValueError:
        raise QrDecodeError("malformed hex in field V_ID") from None
    try:
        contract = parse_address(fields["CONTRACT"])
    except ValueError:
        raise QrDecodeError("malformed hex in field CONTRACT") from None
    return VaccineQrPayload(lot_id=lot_id, contract=contract)
