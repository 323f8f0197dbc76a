"""Matrix files: the ``SEPTQMAT`` binary float32 container and plain CSV."""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"SEPTQMAT"
_HEADER = struct.Struct("<8sII")
FORMATS = ("binary-f32", "csv")


class MatrixFormatError(ValueError):
    pass


class BadMagicError(MatrixFormatError):
    pass


class TruncatedPayloadError(MatrixFormatError):
    pass


class CsvCellError(MatrixFormatError):
    pass


def encode_binary(m: np.ndarray) -> bytes:
    m = np.asarray(m)
    rows, cols = m.shape
    payload = np.ascontiguousarray(m, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, rows, cols) + payload


def decode_binary(buf: bytes) -> np.ndarray:
    if len(buf) < len(MAGIC) or buf[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:len(MAGIC)]!r}, expected {MAGIC!r}")
    if len(buf) < _HEADER.size:
        raise TruncatedPayloadError("header shorter than 16 bytes")
    _, rows, cols = _HEADER.unpack_from(buf)
    need = rows * cols * 4
    have = len(buf) - _HEADER.size
    if have < need:
        raise TruncatedPayloadError(f"payload has {have} bytes, header promises {need} ({rows}x{cols} float32)")
    if have > need:
        raise MatrixFormatError(f"{have - need} trailing bytes after payload")
    data = np.frombuffer(buf, dtype="<f4", offset=_HEADER.size, count=rows * cols)
    return data.reshape(rows, cols).astype(np.float64)


def encode_csv(m: np.ndarray) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.asarray(m))


def decode_csv(text: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        row = []
        for cell in line.split(","):
            try:
                row.append(float(cell))
            except ValueError:
                raise CsvCellError(f"line {lineno}: non-numeric cell {cell!r}") from None
        rows.append(row)
    if not rows:
        raise MatrixFormatError("empty CSV")
    if len({len(r) for r in rows}) != 1:
        raise MatrixFormatError("ragged CSV rows")
    return np.array(rows, dtype=np.float64)


def infer_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "binary-f32"


def read_matrix(path, fmt: str | None = None) -> np.ndarray:
    fmt = fmt or infer_format(path)
    if fmt == "binary-f32":
        with open(path, "rb") as f:
            return decode_binary(f.read())
    if fmt == "csv":
        with open(path, encoding="utf-8") as f:
            return decode_csv(f.read())
    raise ValueError(f"unknown matrix format {fmt!r}; expected one of {FORMATS}")


def write_matrix(m, path, fmt: str | None = None) -> None:
    fmt = fmt or infer_format(path)
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("write_matrix expects a 2-D array")
    if fmt == "binary-f32":
        data = encode_binary(m)
        with open(path, "wb") as f:
            f.write(data)
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(encode_csv(m))
    else:
        raise ValueError(f"unknown matrix format {fmt!r}; expected one of {FORMATS}")


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
