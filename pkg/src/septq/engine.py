"""Column-by-column quantization with reserved weights and error compensation.

The loop follows the usual layer-wise recipe: factor the damped inverse
Hessian once, walk the columns in blocks of ``blocksize``, round each column
(leaving reserved entries untouched), feed the scaled rounding error into the
remaining columns of the block, and push the accumulated block error onto
all later columns once the block is done.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .grid import GRANULARITIES, QuantGrid, grid_search
from .importance import StrategyConfig, dynamic_mask_trace, make_mask, score_all
from .linalg import DimensionMismatchError, as_matrix, cholesky, hessian, matmul, spd_inverse

RESERVED_VALUE_BITS = 16


@dataclass
class EngineConfig:
    bits: int = 2
    p: float = 1.0
    blocksize: int = 128
    damping_frac: float = 0.01
    grid_steps: int = 100
    granularity: str = "per-matrix"
    timing: str = "static"
    scope: str = "global"
    local_block: int = 128

    def __post_init__(self):
        if not 2 <= self.bits <= 8:
            raise ValueError(f"bits must be in [2, 8], got {self.bits}")
        if self.blocksize < 1:
            raise ValueError("blocksize must be >= 1")
        if self.damping_frac < 0:
            raise ValueError("damping_frac must be >= 0")
        if self.grid_steps < 2:
            raise ValueError("grid_steps must be >= 2")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")
        self.strategy  # validates timing / scope / p

    @property
    def strategy(self) -> StrategyConfig:
        return StrategyConfig(self.timing, self.scope, self.p, self.local_block)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class QuantResult:
    codes: np.ndarray
    grid: QuantGrid
    mask: np.ndarray
    w_hat: np.ndarray
    reserved: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def reserved_count(self) -> int:
        return int(self.mask.sum())


def reserved_entries(mask: np.ndarray, w_hat: np.ndarray) -> list[tuple[int, int, float]]:
    rows, cols = np.nonzero(mask)
    return [(int(r), int(c), float(w_hat[r, c])) for r, c in zip(rows, cols)]


def dequantize(codes, grid: QuantGrid, reserved) -> np.ndarray:
    """Rebuild the quantized matrix from codes plus the full-precision overlay."""
    w_hat = grid.dequantize(np.asarray(codes))
    for r, c, v in reserved:
        w_hat[r, c] = v
    return w_hat


def obs_delta(hinv, j: int, gap: float) -> np.ndarray:
    """Row increment that absorbs a rounding gap at position ``j``.

    Minimizes ``0.5 * d^T H d`` subject to ``d[j] = -gap`` given ``hinv = H^-1``:
    ``d = -gap / hinv[j, j] * hinv[:, j]``.
    """
    hinv = np.asarray(hinv, dtype=np.float64)
    return -gap / hinv[j, j] * hinv[:, j]


def compensate_column(w_tail, err_col, hinv_row_slice) -> np.ndarray:
    """``w_tail - outer(err_col, hinv_row_slice)``; rows with zero error are unchanged."""
    return np.asarray(w_tail, dtype=np.float64) - np.multiply.outer(err_col, hinv_row_slice)


def layer_error(w, w_hat, x) -> float:
    """Squared Frobenius norm of the output difference ``(W - W_hat) X``."""
    diff = matmul(np.asarray(w, dtype=np.float64) - np.asarray(w_hat, dtype=np.float64), x)
    return float(np.sum(diff * diff))


def effective_bits(bits: int, p: float) -> float:
    """Bits per weight under the convention that 1% reserved weights cost 0.1 bit."""
    return round(bits + p / 10.0, 6)


def effective_bits_honest(bits: int, reserved_count: int, shape) -> float:
    """Bits per weight charging each reserved weight a 16-bit value and a (row, col) index."""
    rows, cols = shape
    index_bits = 2 * math.ceil(math.log2(max(rows, cols, 2)))
    return bits + reserved_count * (RESERVED_VALUE_BITS + index_bits) / (rows * cols)


def quantize_with_mask(w, hinv_upper, grid: QuantGrid, mask, blocksize: int):
    """Blocked column loop. Returns ``(codes, w_hat)``.

    ``hinv_upper`` is the upper Cholesky factor of the damped inverse Hessian.
    Entries with ``mask`` set keep their current (compensated) value.
    """
    w = np.array(w, dtype=np.float64, copy=True)
    u = np.asarray(hinv_upper, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    rows, cols = w.shape
    b = min(blocksize, cols)
    codes = np.zeros((rows, cols), dtype=np.int64)
    q = np.zeros((rows, cols))
    for i in range(0, cols, b):
        i2 = min(i + b, cols)
        blk = w[:, i:i2].copy()
        errs = np.zeros((rows, i2 - i))
        for jj in range(i2 - i):
            j = i + jj
            col = blk[:, jj]
            c, dq = grid.quantize(col)
            dq = np.where(mask[:, j], col, dq)
            codes[:, j] = c
            q[:, j] = dq
            err = (col - dq) / u[j, j]
            errs[:, jj] = err
            blk[:, jj + 1 :] = compensate_column(blk[:, jj + 1 :], err, u[j, j + 1 : i2])
        w[:, i:i2] = blk
        if i2 < cols:
            w[:, i2:] -= matmul(errs, u[i:i2, i2:])
    return codes, q


def inverse_hessian_factor(x, damping_frac: float) -> tuple[np.ndarray, np.ndarray]:
    """``(hinv, upper)`` for ``hinv = (2 X X^T + lam I)^-1 = upper^T upper``."""
    hinv = spd_inverse(hessian(x, damping_frac))
    return hinv, cholesky(hinv).upper


def run_septq(w, x, cfg: EngineConfig, grid: QuantGrid | None = None, mask=None) -> QuantResult:
    """Quantize ``w`` against calibration inputs ``x`` (shape ``cols x n``).

    ``grid`` and ``mask`` override the grid search and the mask selection.
    """
    w = as_matrix(w, "weights")
    x = as_matrix(x, "calibration set")
    if w.shape[1] != x.shape[0]:
        raise DimensionMismatchError(f"weights have {w.shape[1]} columns but calibration set has {x.shape[0]} rows")
    t0 = time.perf_counter()
    if grid is None:
        grid = grid_search(w, cfg.bits, cfg.granularity, cfg.grid_steps)
    hinv, upper = inverse_hessian_factor(x, cfg.damping_frac)
    if mask is None:
        strat = cfg.strategy
        if strat.timing == "dynamic":
            mask = dynamic_mask_trace(w, upper, grid, strat)
        else:
            mask = make_mask(score_all(w, 2.0 * np.diag(hinv), grid), strat)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != w.shape:
        raise DimensionMismatchError(f"mask shape {mask.shape} does not match weights {w.shape}")
    codes, w_hat = quantize_with_mask(w, upper, grid, mask, cfg.blocksize)
    runtime = time.perf_counter() - t0

    n_res = int(mask.sum())
    metrics = {
        "layer_error": layer_error(w, w_hat, x),
        "effective_bits_paper": effective_bits(cfg.bits, cfg.p),
        "effective_bits_honest": effective_bits_honest(cfg.bits, n_res, w.shape),
        "reserved_count": n_res,
        "runtime_seconds": runtime,
    }
    return QuantResult(codes, grid, mask, w_hat, reserved_entries(mask, w_hat), metrics)


def run_gptq(w, x, cfg: EngineConfig, grid: QuantGrid | None = None) -> QuantResult:
    """Same loop with nothing reserved."""
    w = as_matrix(w, "weights")
    return run_septq(w, x, replace(cfg, p=0.0), grid=grid, mask=np.zeros(w.shape, dtype=bool))
