"""Per-weight importance scores and reservation masks.

A weight's score estimates how much the layer-output error grows when that
single weight is rounded and the rest of its row is re-fit to compensate.
The top ``p`` percent of weights by score are kept in full precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import QuantGrid, round_half_away
from .linalg import SingularHessianError

TIMINGS = ("static", "dynamic")
SCOPES = ("global", "local")


@dataclass(frozen=True)
class StrategyConfig:
    timing: str = "static"
    scope: str = "global"
    p: float = 1.0
    block: int = 128

    def __post_init__(self):
        if self.timing not in TIMINGS:
            raise ValueError(f"timing must be one of {TIMINGS}, got {self.timing!r}")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}, got {self.scope!r}")
        if not 0.0 <= self.p <= 100.0:
            raise ValueError(f"p must be a percentage in [0, 100], got {self.p}")
        if self.block < 1:
            raise ValueError("block must be >= 1")


def reserve_count(p: float, n: int) -> int:
    return int(round_half_away(p / 100.0 * n))


def score_all(w, hinv_diag, g: QuantGrid) -> np.ndarray:
    """``s[i, j] = (w[i, j] - quant(w[i, j]))**2 / (2 * hinv_diag[j])``.

    ``hinv_diag`` is the diagonal of ``(X X^T)^-1`` (or of its damped
    stand-in ``2 * (2 X X^T + lam I)^-1``).
    """
    w = np.asarray(w, dtype=np.float64)
    hinv_diag = np.asarray(hinv_diag, dtype=np.float64)
    if hinv_diag.shape != (w.shape[1],):
        raise ValueError(f"hinv_diag needs {w.shape[1]} entries, got {hinv_diag.shape}")
    if not np.all(hinv_diag > 0):
        j = int(np.argmin(hinv_diag))
        raise SingularHessianError(f"inverse-Hessian diagonal entry {j} is {hinv_diag[j]!r}")
    _, dq = g.quantize(w)
    return (w - dq) ** 2 / (2.0 * hinv_diag)


def _top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Flat indices of the k largest scores; ties go to the lower flat index."""
    order = np.argsort(-scores.ravel(), kind="stable")
    return order[:k]


def select_mask(scores, cfg: StrategyConfig) -> np.ndarray:
    """Global top-``p``% boolean mask (True = keep in full precision)."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.zeros(scores.shape, dtype=bool)
    mask.flat[_top_k(scores, reserve_count(cfg.p, scores.size))] = True
    return mask


def _block_shape(block) -> tuple[int, int]:
    if isinstance(block, (tuple, list)):
        return int(block[0]), int(block[1])
    return int(block), int(block)


def select_mask_local(scores, cfg: StrategyConfig, block=None) -> np.ndarray:
    """Top-``p``% within each tile; edge tiles use their actual size.

    ``block`` overrides ``cfg.block`` and may be a ``(rows, cols)`` tile shape,
    e.g. ``(n_rows, 1)`` for a per-column budget.
    """
    scores = np.asarray(scores, dtype=np.float64)
    br, bc = _block_shape(cfg.block if block is None else block)
    mask = np.zeros(scores.shape, dtype=bool)
    for r0 in range(0, scores.shape[0], br):
        for c0 in range(0, scores.shape[1], bc):
            tile = scores[r0 : r0 + br, c0 : c0 + bc]
            sub = np.zeros(tile.shape, dtype=bool)
            sub.flat[_top_k(tile, reserve_count(cfg.p, tile.size))] = True
            mask[r0 : r0 + br, c0 : c0 + bc] = sub
    return mask


def make_mask(scores, cfg: StrategyConfig) -> np.ndarray:
    if cfg.scope == "global":
        return select_mask(scores, cfg)
    return select_mask_local(scores, cfg)


def dynamic_mask_trace(w, hinv_upper, g: QuantGrid, cfg: StrategyConfig) -> np.ndarray:
    """Mask chosen column by column on the compensated weights.

    Each column's scores are recomputed from the current (already updated)
    weights and its top ``p``% rows are reserved; the remaining rows are
    rounded and their error is pushed onto later columns through the rows of
    ``hinv_upper``, the upper Cholesky factor of the damped inverse Hessian.
    """
    w = np.array(w, dtype=np.float64, copy=True)
    u = np.asarray(hinv_upper, dtype=np.float64)
    rows, cols = w.shape
    k = reserve_count(cfg.p, rows)
    mask = np.zeros(w.shape, dtype=bool)
    for j in range(cols):
        col = w[:, j]
        _, dq = g.quantize(col)
        d = u[j, j]
        # conditional inverse-Hessian diagonal is d**2; constant within a column
        s = (col - dq) ** 2 / (2.0 * d * d)
        keep = _top_k(s, k)
        mask[keep, j] = True
        err = np.where(mask[:, j], 0.0, (col - dq) / d)
        if j + 1 < cols:
            w[:, j + 1 :] -= np.multiply.outer(err, u[j, j + 1 :])
    return mask


def score_histogram(scores, bin_edges) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin counts and share of total score mass.

    Bins are half-open ``[lo, hi)`` except the last, which is closed. Scores
    outside the edges are folded into the first or last bin so every weight
    is counted.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("bin edges must be a strictly increasing sequence of at least two values")
    nbins = edges.size - 1
    idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    mass = np.bincount(idx, weights=s, minlength=nbins)
    total = float(mass.sum())
    frac = mass / total if total > 0 else np.where(counts > 0, counts / s.size, 0.0)
    return counts, frac


def log_bin_edges(scores, nbins: int = 20) -> np.ndarray:
    """Edges ``[0, logspace(min positive, max)]`` suited to long-tailed scores."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    pos = s[s > 0]
    if pos.size == 0:
        return np.array([0.0, 1.0])
    lo, hi = float(pos.min()), float(pos.max())
    if lo == hi:
        return np.array([0.0, lo, 2.0 * lo])
    return np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), nbins)])


def mask_block_sums(mask, block: int = 128) -> np.ndarray:
    """Number of reserved entries in each ``block x block`` tile."""
    m = np.asarray(mask).astype(np.int64)
    nr = -(-m.shape[0] // block)
    nc = -(-m.shape[1] // block)
    padded = np.zeros((nr * block, nc * block), dtype=np.int64)
    padded[: m.shape[0], : m.shape[1]] = m
    return padded.reshape(nr, block, nc, block).sum(axis=(1, 3))


def score_mass(scores, mask) -> float:
    return float(np.sum(np.asarray(scores)[np.asarray(mask, dtype=bool)]))
