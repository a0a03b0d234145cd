"""Canonical, length-prefixed byte encoding for operation arguments.

Every field is emitted as a 4-byte big-endian length followed by the field
bytes, in declaration order.  The encoding is what gets signed and hashed,
so it must stay byte-stable.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

from .crypto import ADDRESS_LEN, HASH_LEN

_INT_WIDTH = 8


class EncodingError(ValueError):
    pass


def _field_bytes(value: Any, kind: str) -> bytes:
    if kind == "address":
        if not isinstance(value, bytes) or len(value) != ADDRESS_LEN:
            raise EncodingError(f"address field must be {ADDRESS_LEN} bytes")
        return value
    if kind == "hash32":
        if not isinstance(value, bytes) or len(value) != HASH_LEN:
            raise EncodingError(f"hash32 field must be {HASH_LEN} bytes")
        return value
    if kind == "string":
        if not isinstance(value, str):
            raise EncodingError("string field must be str")
        return value.encode("utf-8")
    if kind == "int":
        return int(value).to_bytes(_INT_WIDTH, "big", signed=True)
    if kind == "uint":
        if int(value) < 0:
            raise EncodingError("uint field must be non-negative")
        return int(value).to_bytes(_INT_WIDTH, "big", signed=False)
    raise EncodingError(f"unknown field kind {kind!r}")


def _field_value(raw: bytes, kind: str) -> Any:
    if kind == "address":
        if len(raw) != ADDRESS_LEN:
            raise EncodingError("bad address length")
        return raw
    if kind == "hash32":
        if len(raw) != HASH_LEN:
            raise EncodingError("bad hash32 length")
        return raw
    if kind == "string":
        return raw.decode("utf-8")
    if kind == "int":
        if len(raw) != _INT_WIDTH:
            raise EncodingError("bad int length")
        return int.from_bytes(raw, "big", signed=True)
    if kind == "uint":
        if len(raw) != _INT_WIDTH:
            raise EncodingError("bad uint length")
        return int.from_bytes(raw, "big", signed=False)
    raise EncodingError(f"unknown field kind {kind!r}")


def length_prefixed(chunks: Sequence[bytes]) -> bytes:
    out = bytearray()
    for chunk in chunks:
        out.extend(len(chunk).to_bytes(4, "big"))
        out.extend(chunk)
    return bytes(out)


def encode_args(values: Sequence[Any], kinds: Sequence[str]) -> bytes:
    if len(values) != len(kinds):
        raise EncodingError(f"expected {len(kinds)} arguments, got {len(values)}")
    return length_prefixed([_field_bytes(v, k) for v, k in zip(values, kinds)])


def decode_args(blob: bytes, kinds: Sequence[str]) -> list:
    values = []
    offset = 0
    for kind in kinds:
        if offset + 4 > len(blob):
            raise EncodingError("truncated argument encoding")
        length = int.from_bytes(blob[offset:offset + 4], "big")
        offset += 4
        if offset + length > len(blob):
            raise EncodingError("truncated argument field")
        values.append(_field_value(blob[offset:offset + length], kind))
        offset += length
    if offset != len(blob):
        raise EncodingError("trailing bytes in argument encoding")
    return values


def canonical_json(obj: Any) -> str:
    """Deterministic JSON rendering used for persistence and digests."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
