import pytest

from coldchain.crypto import keccak256, to_hex
from coldchain.identity import (
    BeneficiaryCredentials,
    BeneficiaryQrPayload,
    QrDecodeError,
    VaccineQrPayload,
    beneficiary_root,
    decode_beneficiary_qr,
    decode_vaccine_qr,
    encode_beneficiary_qr,
    encode_vaccine_qr,
    generate_secret,
    hash_text,
)

# frozen expected values for the walkthrough credentials
PI = "20-10563145-8"
SECRET = "my-super-secret"
HASH_PI = "a3f6550e5420ddda304a6b22772eb70b48ada3c7eb14648e321bb65387c8cfab"
HASH_SK = "820371900007448f4a8d909327870ece84168bf90f1de8dddc0b6c7473c44b40"
ROOT = "fe08609620228b43d9eb80125dfab7a1686e9c3cd7ea5326aa1c5abf7e689b87"


def test_hash_pi_frozen_value():
    digest = hash_text(PI).hex()
    assert digest == HASH_PI
    assert len(digest) == 64


def test_hash_secret_frozen_value():
    assert hash_text(SECRET).hex() == HASH_SK


def test_root_frozen_value():
    creds = BeneficiaryCredentials.create(PI, SECRET)
    assert creds.root.hex() == ROOT


def test_root_is_order_sensitive():
    a, b = keccak256(b"a"), keccak256(b"b")
    assert beneficiary_root(a, b) != beneficiary_root(b, a)


def test_root_rejects_short_leaves():
    with pytest.raises(ValueError):
        beneficiary_root(b"\x00" * 31, b"\x00" * 32)


def test_create_with_random_secret():
    creds = BeneficiaryCredentials.create(PI)
    assert isinstance(creds.sk, bytes)
    assert len(creds.sk) == 32
    assert creds.root == beneficiary_root(creds.hash_pi, creds.hash_sk)


def test_generate_secret_unique():
    assert generate_secret() != generate_secret()


def test_beneficiary_qr_round_trip():
    payload = BeneficiaryQrPayload(
        pi=PI,
        hash_secret=hash_text(SECRET),
        contract=b"\xaa" * 20,
        tx_hash=keccak256(b"registration-tx"),
    )
    data = encode_beneficiary_qr(payload)
    assert b"PI:" + PI.encode() in data
    assert decode_beneficiary_qr(data) == payload


def test_vaccine_qr_round_trip():
    payload = VaccineQrPayload(lot_id=keccak256(b"lot"), contract=b"\xbb" * 20)
    data = encode_vaccine_qr(payload)
    assert data.startswith(b"V_ID:0x")
    assert decode_vaccine_qr(data) == payload


def test_qr_missing_field_named():
    data = encode_vaccine_qr(
        VaccineQrPayload(lot_id=keccak256(b"lot"), contract=b"\xbb" * 20))
    without_contract = b"\n".join(
        line for line in data.split(b"\n") if not line.startswith(b"CONTRACT"))
    with pytest.raises(QrDecodeError, match="CONTRACT"):
        decode_vaccine_qr(without_contract)


def test_qr_malformed_hex_named():
    contract_hex = to_hex(b"\xbb" * 20)
    data = f"V_ID:0xnothex\nCONTRACT:{contract_hex}".encode()
    with pytest.raises(QrDecodeError, match="V_ID"):
        decode_vaccine_qr(data)


def test_qr_malformed_line():
    with pytest.raises(QrDecodeError):
        decode_vaccine_qr(b"just some junk without a separator")


def test_qr_unknown_field_warned_and_ignored():
    payload = VaccineQrPayload(lot_id=keccak256(b"lot"), contract=b"\xcc" * 20)
    data = encode_vaccine_qr(payload) + b"\nEXTRA:stuff"
    with pytest.warns(UserWarning, match="EXTRA"):
        assert decode_vaccine_qr(data) == payload
