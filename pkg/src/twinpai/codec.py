"""Length-prefixed big-endian integer encoding used on the wire and in key digests."""

from __future__ import annotations

import struct
from typing import Iterable

from .errors import FrameDecodeError, InvalidArgument

_LEN = struct.Struct("!I")


def int_to_bytes(value: int) -> bytes:
    """Minimal big-endian magnitude; zero encodes as the empty string."""
    if value < 0:
        raise InvalidArgument("only non-negative integers are encodable")
    return value.to_bytes((value.bit_length() + 7) // 8, "big")


def encode_bigint(value: int) -> bytes:
    raw = int_to_bytes(value)
    return _LEN.pack(len(raw)) + raw


def encode_bigints(values: Iterable[int]) -> bytes:
    return b"".join(encode_bigint(v) for v in values)


def decode_bigints(buf: bytes, base_offset: int = 0) -> list[int]:
    out = []
    pos = 0
    while pos < len(buf):
        if pos + 4 > len(buf):
            raise FrameDecodeError("truncated integer length", base_offset + pos)
        (n,) = _LEN.unpack_from(buf, pos)
        pos += 4
        if pos + n > len(buf):
            raise FrameDecodeError("truncated integer magnitude", base_offset + pos)
        if n and buf[pos] == 0:
            raise FrameDecodeError("non-minimal integer encoding", base_offset + pos)
        out.append(int.from_bytes(buf[pos : pos + n], "big"))
        pos += n
    return out


def magnitude_sizes(buf: bytes) -> list[int]:
    """Byte length of each integer magnitude in an encoded sequence."""
    sizes = []
    pos = 0
    while pos + 4 <= len(buf):
        (n,) = _LEN.unpack_from(buf, pos)
        sizes.append(n)
        pos += 4 + n
    return sizes
