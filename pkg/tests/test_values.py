import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stagelink.values import (
    CodecError,
    DepthExceeded,
    TrailingBytes,
    TruncatedValue,
    UnknownTag,
    decode_value,
    encode_value,
    f32,
    values_equal,
)


class TestEncodeExamples:
    def test_float64(self):
        data = encode_value(3.5)
        assert data == b"\x01" + struct.pack("<d", 3.5)
        assert data[1:] == bytes.fromhex("0000000000000c40")

    def test_bool(self):
        assert encode_value(True) == b"\x03\x01"
        assert encode_value(False) == b"\x03\x00"

    def test_int64(self):
        assert encode_value(-2) == b"\x02" + struct.pack("<q", -2)

    def test_string(self):
        assert encode_value("hi") == b"\x04" + struct.pack("<I", 2) + b"hi"

    def test_f32_array(self):
        arr = f32([1.0, 2.0])
        data = encode_value(arr)
        assert data == b"\x05" + struct.pack("<I", 2) + struct.pack("<2f", 1.0, 2.0)

    def test_map_canonical_key_order(self):
        a = encode_value({"b": 1, "a": 2})
        b = encode_value({"a": 2, "b": 1})
        assert a == b
        # ascending byte order: "a" first
        assert a.index(b"a") < a.index(b"b")

    def test_map_encodes_identically_twice(self):
        v = {"a": 1}
        assert encode_value(v) == encode_value(v)

    def test_int_overflow(self):
        with pytest.raises(CodecError):
            encode_value(2**63)

    def test_unboxable_type(self):
        with pytest.raises(CodecError):
            encode_value(object())

    def test_non_string_keys(self):
        with pytest.raises(CodecError):
            encode_value({1: 2})

    def test_wrong_array_dtype(self):
        with pytest.raises(CodecError):
            encode_value(np.zeros(3, dtype=np.float64))


class TestDecodeErrors:
    def test_unknown_tag(self):
        with pytest.raises(UnknownTag):
            decode_value(b"\xff")

    def test_truncated_length_prefix(self):
        with pytest.raises(TruncatedValue):
            decode_value(b"\x04\x01\x00")

    def test_truncated_payload(self):
        with pytest.raises(TruncatedValue):
            decode_value(b"\x01\x00\x00")

    def test_trailing_bytes(self):
        with pytest.raises(TrailingBytes):
            decode_value(encode_value(1.0) + b"\x00")

    def test_bad_bool_byte(self):
        with pytest.raises(CodecError):
            decode_value(b"\x03\x02")

    def test_invalid_utf8(self):
        raw = b"\x04" + struct.pack("<I", 2) + b"\xff\xfe"
        with pytest.raises(CodecError, match="utf-8"):
            decode_value(raw)

    def test_duplicate_map_keys(self):
        key = struct.pack("<I", 1) + b"a"
        body = struct.pack("<I", 2) + key + encode_value(1) + key + encode_value(2)
        with pytest.raises(CodecError, match="duplicate"):
            decode_value(b"\x06" + body)


class TestDepth:
    def test_depth_8_ok(self):
        v = 1.0
        for _ in range(7):
            v = {"k": v}
        assert values_equal(decode_value(encode_value(v)), v)

    def test_depth_9_rejected_on_encode(self):
        v = 1.0
        for _ in range(8):
            v = {"k": v}
        with pytest.raises(DepthExceeded):
            encode_value(v)

    def test_deep_bytes_rejected_on_decode(self):
        # hand-build 9 nested maps
        inner = encode_value(1.0)
        for _ in range(8):
            inner = b"\x06" + struct.pack("<I", 1) + struct.pack("<I", 1) + b"k" + inner
        with pytest.raises(DepthExceeded):
            decode_value(inner)


def value_strategy(max_depth=8):
    scalars = st.one_of(
        st.booleans(),
        st.integers(min_value=-(2**63), max_value=2**63 - 1),
        st.floats(allow_nan=False),
        st.text(max_size=30),
        st.lists(
            st.floats(width=32, allow_nan=False, allow_infinity=False), max_size=8
        ).map(f32),
    )
    return st.recursive(
        scalars,
        lambda children: st.dictionaries(st.text(max_size=8), children, max_size=4),
        max_leaves=12,
    ).filter(lambda v: _depth(v) <= max_depth)


def _depth(v):
    if isinstance(v, dict):
        return 1 + max((_depth(x) for x in v.values()), default=0)
    return 1


class TestRoundTrip:
    @given(value_strategy())
    @settings(max_examples=400, deadline=None)
    def test_decode_encode_identity(self, v):
        data = encode_value(v)
        back = decode_value(data)
        assert values_equal(back, v)
        assert encode_value(back) == data  # canonical bytes

    def test_nan_round_trips(self):
        back = decode_value(encode_value(float("nan")))
        assert values_equal(back, float("nan"))
