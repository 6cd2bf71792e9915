import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinpai.codec import decode_bigints, encode_bigint, encode_bigints, int_to_bytes, magnitude_sizes
from twinpai.errors import FrameDecodeError, InvalidArgument


def test_zero_and_small_values():
    assert encode_bigint(0) == b"\x00\x00\x00\x00"
    assert encode_bigint(1) == b"\x00\x00\x00\x01\x01"
    assert encode_bigint(256) == b"\x00\x00\x00\x02\x01\x00"
    with pytest.raises(InvalidArgument):
        int_to_bytes(-1)


@given(st.lists(st.integers(0, 2**4200)))
def test_roundtrip(values):
    buf = encode_bigints(values)
    assert decode_bigints(buf) == values
    assert magnitude_sizes(buf) == [(v.bit_length() + 7) // 8 for v in values]


def test_rejects_truncation_and_padding():
    buf = encode_bigints([2**100, 7])
    with pytest.raises(FrameDecodeError):
        decode_bigints(buf[:-1])
    with pytest.raises(FrameDecodeError):
        decode_bigints(buf + b"\x00\x00")
    with pytest.raises(FrameDecodeError) as err:
        decode_bigints(b"\x00\x00\x00\x02\x00\x05", base_offset=16)
    assert err.value.offset == 20
