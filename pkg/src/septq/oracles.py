"""Brute-force references for checking the engine.

Nothing here touches the engine's factorization or blocked loop: linear
systems go through LAPACK (``numpy.linalg``) and the column loop keeps an
explicit inverse that is downdated after each step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from .engine import QuantResult, reserved_entries
from .grid import QuantGrid

MAX_ORACLE_DIM = 64


@dataclass(frozen=True)
class OracleReport:
    instance_id: int
    quantity: str
    closed_form: float
    brute_force: float
    rel_err: float

    @classmethod
    def compare(cls, instance_id, quantity, closed, brute, elementwise=False) -> "OracleReport":
        """``rel_err = |closed - brute| / max(|brute|, 1e-12)``.

        Arrays are reduced by max-abs, either entry by entry (``elementwise``)
        or as one difference over one scale.
        """
        closed = np.atleast_1d(np.asarray(closed, dtype=np.float64)).ravel()
        brute = np.atleast_1d(np.asarray(brute, dtype=np.float64)).ravel()
        if elementwise:
            rel = float(np.max(np.abs(closed - brute) / np.maximum(np.abs(brute), 1e-12)))
        else:
            rel = float(np.max(np.abs(closed - brute))) / max(float(np.max(np.abs(brute))), 1e-12)
        # vector quantities are summarized by their norms
        c = float(closed[0]) if closed.size == 1 else float(np.linalg.norm(closed))
        b = float(brute[0]) if brute.size == 1 else float(np.linalg.norm(brute))
        return cls(int(instance_id), quantity, c, b, rel)


def write_reports(reports, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow([fl.name for fl in fields(OracleReport)])
        for r in sorted(reports, key=lambda r: (r.instance_id, r.quantity)):
            wr.writerow([r.instance_id, r.quantity, repr(r.closed_form), repr(r.brute_force), repr(r.rel_err)])


def _guard(dim: int) -> None:
    if dim > MAX_ORACLE_DIM:
        raise ValueError(f"oracles are desk-scale only (dim <= {MAX_ORACLE_DIM}), got {dim}")


def rtn_baseline(w, grid: QuantGrid, x=None) -> QuantResult:
    """Independent rounding of every weight; no mask, no compensation."""
    w = np.asarray(w, dtype=np.float64)
    codes, w_hat = grid.quantize(w)
    mask = np.zeros(w.shape, dtype=bool)
    metrics = {}
    if x is not None:
        d = (w - w_hat) @ np.asarray(x, dtype=np.float64)
        metrics["layer_error"] = float(np.sum(d * d))
    return QuantResult(codes, grid, mask, w_hat, [], metrics)


def kkt_delta_oracle(h, j: int, gap: float) -> np.ndarray:
    """Solve ``min 0.5 d^T H d  s.t.  d[j] + gap = 0`` through the bordered KKT system."""
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    _guard(n)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = h
    kkt[n, j] = kkt[j, n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = -gap
    return np.linalg.solve(kkt, rhs)[:n]


def schur_delta_oracle(h, j: int, gap: float) -> np.ndarray:
    """Same minimizer by eliminating ``d[j]``: ``d_F = -H_FF^-1 H_Fj d_j``."""
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    free = [k for k in range(n) if k != j]
    d = np.zeros(n)
    d[j] = -gap
    if free:
        d[free] = -np.linalg.solve(h[np.ix_(free, free)], h[free, j] * d[j])
    return d


def score_oracle(w, x, grid: QuantGrid, i: int, j: int) -> float:
    """Exact ``min ||W X - W'(i, j) X||_F^2`` with only ``W[i, j]`` rounded.

    The rest of row ``i`` is re-fit optimally via the KKT solve; other rows are
    untouched and contribute nothing.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _guard(w.shape[1])
    _, dq = grid.quantize(w)
    gap = w[i, j] - dq[i, j]
    delta = kkt_delta_oracle(2.0 * x @ x.T, j, gap)
    out = delta @ x
    return float(out @ out)


def unblocked_reference(w, x, mask, grid: QuantGrid, damping_frac: float = 0.01) -> QuantResult:
    """Per-column loop with an explicit inverse Hessian and full-width updates.

    After column ``j`` is fixed, the inverse restricted to the remaining
    columns is obtained by eliminating ``j`` from the explicit inverse.
    """
    w0 = np.asarray(w, dtype=np.float64)
    w = w0.copy()
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    rows, cols = w.shape
    _guard(cols)
    h = 2.0 * x @ x.T
    h += damping_frac * np.mean(np.diag(h)) * np.eye(cols)
    hinv = np.linalg.inv(h)
    codes = np.zeros((rows, cols), dtype=np.int64)
    w_hat = np.zeros((rows, cols))
    for j in range(cols):
        c, dq = grid.quantize(w[:, j])
        dq = np.where(mask[:, j], w[:, j], dq)
        codes[:, j], w_hat[:, j] = c, dq
        gap = w[:, j] - dq
        w[:, j + 1 :] -= np.outer(gap / hinv[j, j], hinv[j, j + 1 :])
        hinv = hinv - np.outer(hinv[:, j], hinv[j, :]) / hinv[j, j]
    d = (w0 - w_hat) @ x
    metrics = {"layer_error": float(np.sum(d * d))}
    return QuantResult(codes, grid, mask, w_hat, reserved_entries(mask, w_hat), metrics)
