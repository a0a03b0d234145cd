import pytest
from hypothesis import given, strategies as st

from coldchain.encoding import EncodingError, decode_args, encode_args, length_prefixed


def test_round_trip_mixed_kinds():
    kinds = ("hash32", "string", "int", "uint", "address")
    values = [bytes(range(32)), "transport-temperature", -70, 864_000, b"\xab" * 20]
    assert decode_args(encode_args(values, kinds), kinds) == values


def test_order_sensitivity():
    kinds = ("string", "string")
    assert encode_args(["a", "b"], kinds) != encode_args(["b", "a"], kinds)


def test_arity_mismatch():
    with pytest.raises(EncodingError):
        encode_args(["only-one"], ("string", "string"))


def test_wrong_lengths_rejected():
    with pytest.raises(EncodingError):
        encode_args([b"\x00" * 31], ("hash32",))
    with pytest.raises(EncodingError):
        encode_args([b"\x00" * 21], ("address",))
    with pytest.raises(EncodingError):
        encode_args([-1], ("uint",))


def test_truncated_blob_rejected():
    blob = encode_args([b"\x11" * 32], ("hash32",))
    with pytest.raises(EncodingError):
        decode_args(blob[:-1], ("hash32",))
    with pytest.raises(EncodingError):
        decode_args(blob + b"\x00", ("hash32",))


def test_length_prefixed_is_injective_on_chunk_boundaries():
    assert length_prefixed([b"ab", b"c"]) != length_prefixed([b"a", b"bc"])


@given(st.lists(st.integers(min_value=-(2**63), max_value=2**63 - 1),
                min_size=0, max_size=8))
def test_int_round_trip(values):
    kinds = tuple("int" for _ in values)
    assert decode_args(encode_args(values, kinds), kinds) == values


@given(st.text(max_size=200))
def test_string_round_trip(text):
    assert decode_args(encode_args([text], ("string",)), ("string",)) == [text]
