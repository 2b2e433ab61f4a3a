"""Boxing/unboxing of event payloads.

Payloads are a small tagged union, encoded little-endian with a one-byte
tag: 0x01 Float64, 0x02 Int64, 0x03 Bool, 0x04 Utf8String, 0x05
Float32Array, 0x06 Map. Strings, arrays and maps are length-prefixed with
u32 counts. Encoding is canonical — map keys are serialized in ascending
byte order — so structurally equal values always produce identical bytes.

Python-side representation: float, int, bool, str, one-dimensional
numpy.float32 arrays and dict[str, value]. Map nesting is capped at depth 8
in both directions.
"""

import struct

import numpy as np

TAG_FLOAT64 = 0x01
TAG_INT64 = 0x02
TAG_BOOL = 0x03
TAG_STRING = 0x04
TAG_F32ARRAY = 0x05
TAG_MAP = 0x06

MAX_DEPTH = 8

_F64 = struct.Struct("<d")
_I64 = struct.Struct("<q")
_U32 = struct.Struct("<I")

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class CodecError(ValueError):
    pass


class DepthExceeded(CodecError):
    pass


class UnknownTag(CodecError):
    pass


class TruncatedValue(CodecError):
    pass


class TrailingBytes(CodecError):
    pass


def encode_value(value) -> bytes:
    out = bytearray()
    _encode(value, out, 1)
    return bytes(out)


def _encode(value, out: bytearray, depth: int):
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"nesting exceeds {MAX_DEPTH} levels")
    if isinstance(value, bool):  # before int: bool is an int subclass
        out.append(TAG_BOOL)
        out.append(1 if value else 0)
    elif isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise CodecError(f"integer {value} does not fit in 64 bits")
        out.append(TAG_INT64)
        out += _I64.pack(value)
    elif isinstance(value, float):
        out.append(TAG_FLOAT64)
        out += _F64.pack(value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(TAG_STRING)
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(value, np.ndarray):
        if value.dtype != np.float32 or value.ndim != 1:
            raise CodecError(
                f"arrays must be one-dimensional float32, got {value.dtype} ndim={value.ndim}"
            )
        out.append(TAG_F32ARRAY)
        out += _U32.pack(value.shape[0])
        out += value.astype("<f4").tobytes()
    elif isinstance(value, dict):
        items = []
        for key, v in value.items():
            if not isinstance(key, str):
                raise CodecError(f"map keys must be strings, got {type(key).__name__}")
            items.append((key.encode("utf-8"), v))
        items.sort(key=lambda kv: kv[0])
        out.append(TAG_MAP)
        out += _U32.pack(len(items))
        for raw_key, v in items:
            out += _U32.pack(len(raw_key))
            out += raw_key
            _encode(v, out, depth + 1)
    else:
        raise CodecError(f"cannot box a {type(value).__name__}")


def f32(values) -> np.ndarray:
    """Convenience: make a codec-ready float32 array."""
    return np.asarray(values, dtype=np.float32).reshape(-1)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedValue(
                f"needed {n} bytes at offset {self.pos}, only {len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def decode_value(data: bytes):
    reader = _Reader(data)
    value = _decode(reader, 1)
    if reader.pos != len(data):
        raise TrailingBytes(f"{len(data) - reader.pos} bytes after the value")
    return value


def _decode(reader: _Reader, depth: int):
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"nesting exceeds {MAX_DEPTH} levels")
    tag = reader.take(1)[0]
    if tag == TAG_FLOAT64:
        return _F64.unpack(reader.take(8))[0]
    if tag == TAG_INT64:
        return _I64.unpack(reader.take(8))[0]
    if tag == TAG_BOOL:
        b = reader.take(1)[0]
        if b not in (0, 1):
            raise CodecError(f"bool byte must be 0 or 1, got {b}")
        return bool(b)
    if tag == TAG_STRING:
        n = reader.u32()
        raw = reader.take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CodecError(f"invalid utf-8 in string: {exc}") from None
    if tag == TAG_F32ARRAY:
        n = reader.u32()
        raw = reader.take(4 * n)
        return np.frombuffer(raw, dtype="<f4", count=n).copy()
    if tag == TAG_MAP:
        n = reader.u32()
        out = {}
        for _ in range(n):
            klen = reader.u32()
            raw_key = reader.take(klen)
            try:
                key = raw_key.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CodecError(f"invalid utf-8 in map key: {exc}") from None
            if key in out:
                raise CodecError(f"duplicate map key {key!r}")
            out[key] = _decode(reader, depth + 1)
        return out
    raise UnknownTag(f"unknown tag 0x{tag:02X}")


def values_equal(a, b) -> bool:
    """Structural equality with strict types (1 != 1.0 != True); NaN == NaN."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (
            isinstance(a, np.ndarray)
            and isinstance(b, np.ndarray)
            and a.dtype == b.dtype
            and np.array_equal(a, b, equal_nan=True)
        )
    if isinstance(a, dict) or isinstance(b, dict):
        if not (isinstance(a, dict) and isinstance(b, dict)) or a.keys() != b.keys():
            return False
        return all(values_equal(a[k], b[k]) for k in a)
    if type(a) is not type(b):
        return False
    if isinstance(a, float) and a != a and b != b:
        return True
    return a == b
