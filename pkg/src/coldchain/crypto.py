"""Keccak-256 hashing, Ed25519 keypairs and address derivation.

Keccak-256 here is the original Keccak submission padding (0x01), the
variant Ethereum uses, not NIST SHA3-256 (0x06).  hashlib/OpenSSL only
ship the NIST variant, so the permutation is implemented directly.
"""

from __future__ import annotations

import functools
import json
import os
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

ADDRESS_LEN = 20
HASH_LEN = 32

_MASK = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
    0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
    0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
    0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
    0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# Rotation offsets indexed by (x, y); flat lane index is x + 5*y.
_ROTATIONS = (
    (0, 36, 3, 41, 18),
    (1, 44, 10, 45, 2),
    (62, 6, 43, 15, 61),
    (28, 55, 25, 21, 56),
    (27, 20, 39, 8, 14),
)

# Precomputed (destination, source, rotation) for the rho+pi step and the
# chi neighbour indices, so the permutation loop stays index-lookup only.
_PI_MAP = tuple(
    (y + 5 * ((2 * x + 3 * y) % 5), x + 5 * y, _ROTATIONS[x][y])
    for x in range(5)
    for y in range(5)
)
_CHI_1 = tuple((i % 5 + 1) % 5 + 5 * (i // 5) for i in range(25))
_CHI_2 = tuple((i % 5 + 2) % 5 + 5 * (i // 5) for i in range(25))

_RATE = 136  # bytes, for capacity 512


def _keccak_f(state: list[int]) -> None:
    mask = _MASK
    pi_map = _PI_MAP
    chi_1 = _CHI_1
    chi_2 = _CHI_2
    for rc in _ROUND_CONSTANTS:
        # theta
        c = [
            state[x] ^ state[x + 5] ^ state[x + 10] ^ state[x + 15] ^ state[x + 20]
            for x in range(5)
        ]
        d = [
            c[(x - 1) % 5] ^ ((c[(x + 1) % 5] << 1 | c[(x + 1) % 5] >> 63) & mask)
            for x in range(5)
        ]
        for i in range(25):
            state[i] ^= d[i % 5]
        # rho + pi
        b = [0] * 25
        for dst, src, rot in pi_map:
            lane = state[src]
            b[dst] = (lane << rot | lane >> (64 - rot)) & mask if rot else lane
        # chi
        for i in range(25):
            state[i] = b[i] ^ (~b[chi_1[i]] & b[chi_2[i]]) & mask
        # iota
        state[0] ^= rc


@functools.lru_cache(maxsize=1 << 16)
def keccak256(data: bytes) -> bytes:
    """Keccak-256 digest (Ethereum variant) of `data`.

    Results are memoized (bounded LRU): callers routinely hash the same
    bytes twice, e.g. a transaction hash computed at signing time and
    recomputed during submission checks.
    """
    state = [0] * 25
    padded = bytearray(data)
    padded.append(0x01)
    padded.extend(b"\x00" * (-len(padded) % _RATE))
    padded[-1] ^= 0x80
    for offset in range(0, len(padded), _RATE):
        block = padded[offset:offset + _RATE]
        for i in range(_RATE // 8):
            state[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        _keccak_f(state)
    return b"".join(state[i].to_bytes(8, "little") for i in range(4))


def to_hex(value: bytes) -> str:
    """0x-prefixed lowercase hex rendering."""
    return "0x" + value.hex()


def parse_hex(text: str, length: int) -> bytes:
    """Parse a 0x-prefixed hex string into exactly `length` bytes."""
    if not isinstance(text, str) or not text.lower().startswith("0x"):
        raise ValueError(f"expected 0x-prefixed hex, got {text!r}")
    try:
        raw = bytes.fromhex(text[2:])
    except ValueError:
        raise ValueError(f"malformed hex: {text!r}") from None
    if len(raw) != length:
        raise ValueError(f"expected {length} bytes, got {len(raw)} in {text!r}")
    return raw


def parse_address(text: str) -> bytes:
    return parse_hex(text, ADDRESS_LEN)


def parse_hash32(text: str) -> bytes:
    return parse_hex(text, HASH_LEN)


def derive_address(public: bytes) -> bytes:
    """Address = last 20 bytes of keccak256(public key bytes)."""
    if not isinstance(public, bytes) or len(public) != 32:
        raise ValueError("public key must be 32 raw Ed25519 bytes")
    return keccak256(public)[-ADDRESS_LEN:]


@dataclass(frozen=True)
class Keypair:
    """Ed25519 signing identity with a derived 20-byte address."""

    seed: bytes
    public: bytes
    address: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "Keypair":
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        secret = Ed25519PrivateKey.from_private_bytes(seed)
        public = secret.public_key().public_bytes_raw()
        return cls(seed=seed, public=public, address=derive_address(public))

    @classmethod
    def generate(cls) -> "Keypair":
        return cls.from_seed(os.urandom(32))

    def sign(self, message: bytes) -> bytes:
        secret = Ed25519PrivateKey.from_private_bytes(self.seed)
        return secret.sign(message)

    def save(self, path: str | Path) -> None:
        payload = {"seed": to_hex(self.seed), "address": to_hex(self.address)}
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Keypair":
        payload = json.loads(Path(path).read_text())
        return cls.from_seed(parse_hex(payload["seed"], 32))


def verify_signature(public: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False
