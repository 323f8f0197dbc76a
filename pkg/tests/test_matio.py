import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from septq.matio import (
    BadMagicError,
    CsvCellError,
    MatrixFormatError,
    TruncatedPayloadError,
    decode_binary,
    encode_binary,
    read_matrix,
    write_matrix,
)


def test_binary_roundtrip_is_bit_exact(tmp_path):
    m = np.random.default_rng(0).normal(size=(3, 3)).astype(np.float32)
    p = tmp_path / "m.bin"
    write_matrix(m, p)
    back = read_matrix(p)
    assert back.astype(np.float32).tobytes() == m.tobytes()


def test_binary_layout(tmp_path):
    p = tmp_path / "m.bin"
    write_matrix([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], p)
    raw = p.read_bytes()
    assert raw[:8] == b"SEPTQMAT"
    assert struct.unpack("<II", raw[8:16]) == (2, 3)
    assert np.frombuffer(raw[16:], "<f4").tolist() == [1, 2, 3, 4, 5, 6]


def test_csv_single_value(tmp_path):
    p = tmp_path / "m.csv"
    write_matrix([[42.0]], p)
    assert p.read_text() == "42.0\n"
    assert read_matrix(p).tolist() == [[42.0]]


def test_truncated_payload():
    buf = b"SEPTQMAT" + struct.pack("<II", 2, 3) + np.zeros(5, "<f4").tobytes()
    with pytest.raises(TruncatedPayloadError):
        decode_binary(buf)


def test_bad_magic():
    with pytest.raises(BadMagicError):
        decode_binary(b"NOTAMAGC" + struct.pack("<II", 1, 1) + b"\0\0\0\0")


def test_non_numeric_csv(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1.0,2.0\n3.0,abc\n")
    with pytest.raises(CsvCellError):
        read_matrix(p)


def test_errors_are_distinct():
    kinds = {BadMagicError, TruncatedPayloadError, CsvCellError}
    assert len(kinds) == 3
    assert all(issubclass(k, MatrixFormatError) for k in kinds)
    assert not issubclass(BadMagicError, TruncatedPayloadError)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6), elements=st.floats(width=32, allow_nan=False)))
def test_binary_payload_preserves_every_bit(m):
    assert decode_binary(encode_binary(m)).astype(np.float32).tobytes() == m.tobytes()
