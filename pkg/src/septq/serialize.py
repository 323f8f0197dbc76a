"""On-disk layout of a quantized layer.

A result directory holds::

    codes.bin      SEPTQQNT header + MSB-first packed codes
    grid.json      {bits, scale, zero_point, granularity}
    reserved.csv   row,col,value (value printed at full double precision)
    metrics.json   error / bit / timing figures
"""

from __future__ import annotations

import csv
import json
import os
import struct

import numpy as np

from .engine import QuantResult, dequantize
from .grid import QuantGrid
from .matio import BadMagicError, MatrixFormatError, TruncatedPayloadError

CODES_MAGIC = b"SEPTQQNT"
_CODES_HEADER = struct.Struct("<8sIIB")
METRICS_SCHEMA_VERSION = 1


def pack_codes(codes: np.ndarray, bits: int) -> bytes:
    codes = np.asarray(codes, dtype=np.int64)
    if np.any(codes < 0) or np.any(codes >> bits):
        raise ValueError(f"codes do not fit in {bits} bits")
    rows, cols = codes.shape
    shifts = np.arange(bits - 1, -1, -1)
    bitplanes = ((codes.reshape(-1, 1) >> shifts) & 1).astype(np.uint8)
    return _CODES_HEADER.pack(CODES_MAGIC, rows, cols, bits) + np.packbits(bitplanes.ravel()).tobytes()


def unpack_codes(buf: bytes) -> tuple[np.ndarray, int]:
    if buf[: len(CODES_MAGIC)] != CODES_MAGIC:
        raise BadMagicError(f"bad magic {buf[:len(CODES_MAGIC)]!r}, expected {CODES_MAGIC!r}")
    if len(buf) < _CODES_HEADER.size:
        raise TruncatedPayloadError("code header shorter than 17 bytes")
    _, rows, cols, bits = _CODES_HEADER.unpack_from(buf)
    if not 2 <= bits <= 8:
        raise MatrixFormatError(f"unsupported bit width {bits}")
    n = rows * cols
    need = -(-n * bits // 8)
    payload = np.frombuffer(buf, dtype=np.uint8, offset=_CODES_HEADER.size)
    if payload.size < need:
        raise TruncatedPayloadError(f"code payload has {payload.size} bytes, header promises {need}")
    if payload.size > need:
        raise MatrixFormatError(f"{payload.size - need} trailing bytes after code payload")
    planes = np.unpackbits(payload)[: n * bits].reshape(n, bits).astype(np.int64)
    codes = planes @ (1 << np.arange(bits - 1, -1, -1))
    return codes.reshape(rows, cols), bits


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def save_result(result: QuantResult, out_dir, extra_metrics: dict | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "codes.bin"), "wb") as f:
        f.write(pack_codes(result.codes, result.grid.bits))
    _dump_json(result.grid.to_json(), os.path.join(out_dir, "grid.json"))
    with open(os.path.join(out_dir, "reserved.csv"), "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["row", "col", "value"])
        for r, c, v in result.reserved:
            wr.writerow([r, c, repr(float(v))])
    metrics = {"schema_version": METRICS_SCHEMA_VERSION, **result.metrics, **(extra_metrics or {})}
    _dump_json(metrics, os.path.join(out_dir, "metrics.json"))


def load_result(out_dir) -> tuple[np.ndarray, QuantGrid, list]:
    with open(os.path.join(out_dir, "codes.bin"), "rb") as f:
        codes, bits = unpack_codes(f.read())
    with open(os.path.join(out_dir, "grid.json"), encoding="utf-8") as f:
        grid = QuantGrid.from_json(json.load(f))
    if grid.bits != bits:
        raise MatrixFormatError(f"codes are {bits}-bit but grid.json says {grid.bits}")
    reserved = []
    with open(os.path.join(out_dir, "reserved.csv"), newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            reserved.append((int(rec["row"]), int(rec["col"]), float(rec["value"])))
    return codes, grid, reserved


def dequantize_dir(out_dir) -> np.ndarray:
    codes, grid, reserved = load_result(out_dir)
    return dequantize(codes, grid, reserved)
