"""Uniform asymmetric round-to-nearest quantization and min/max grid search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRANULARITIES = ("per-matrix", "per-row")


def round_half_away(x):
    """Round to nearest integer, ties away from zero, for any float array."""
    x = np.asarray(x, dtype=np.float64)
    a = np.abs(x)
    f = np.floor(a)
    # a - f is exact for doubles, so the tie test is exact too
    r = f + (a - f >= 0.5)
    return np.copysign(r, x)


@dataclass(frozen=True)
class QuantGrid:
    """Scale/zero-point grid for ``bits``-bit codes.

    ``scale`` and ``zero_point`` are 0-d arrays for a per-matrix grid and
    length-``rows`` vectors for a per-row grid.
    """

    bits: int
    scale: np.ndarray
    zero_point: np.ndarray
    granularity: str = "per-matrix"

    def __post_init__(self):
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float64))
        object.__setattr__(self, "zero_point", np.asarray(self.zero_point, dtype=np.int64))
        if not 2 <= self.bits <= 8:
            raise ValueError(f"bits must be in [2, 8], got {self.bits}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")
        if self.granularity == "per-matrix" and (self.scale.ndim or self.zero_point.ndim):
            raise ValueError("per-matrix grid takes scalar scale and zero point")
        if self.granularity == "per-row" and (self.scale.ndim != 1 or self.scale.shape != self.zero_point.shape):
            raise ValueError("per-row grid takes matching 1-D scale and zero point vectors")
        if not np.all(self.scale > 0) or not np.all(np.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")
        if np.any(self.zero_point < 0) or np.any(self.zero_point > self.maxq):
            raise ValueError(f"zero point outside [0, {self.maxq}]")

    @property
    def maxq(self) -> int:
        return (1 << self.bits) - 1

    def _params(self, ndim: int):
        if self.granularity == "per-row" and ndim == 2:
            return self.scale[:, None], self.zero_point[:, None]
        return self.scale, self.zero_point

    def quantize(self, w) -> tuple[np.ndarray, np.ndarray]:
        """Codes and dequantized values for a column (1-D, one entry per row) or a matrix."""
        w = np.asarray(w, dtype=np.float64)
        s, z = self._params(w.ndim)
        codes = np.clip(round_half_away(w / s) + z, 0, self.maxq).astype(np.int64)
        return codes, self.dequantize(codes)

    def dequantize(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        s, z = self._params(codes.ndim)
        return s * (codes - z).astype(np.float64)

    def to_json(self) -> dict:
        return {
            "bits": self.bits,
            "scale": self.scale.tolist(),
            "zero_point": self.zero_point.tolist(),
            "granularity": self.granularity,
        }

    @classmethod
    def from_json(cls, d: dict) -> "QuantGrid":
        return cls(int(d["bits"]), d["scale"], d["zero_point"], d.get("granularity", "per-matrix"))


def quantize_value(w: float, g: QuantGrid) -> tuple[int, float]:
    code, dq = g.quantize(np.float64(w))
    return int(code), float(dq)


def quantize_column(col, g: QuantGrid) -> tuple[np.ndarray, np.ndarray]:
    return g.quantize(np.asarray(col, dtype=np.float64).reshape(-1))


def _alpha_search(w: np.ndarray, bits: int, steps: int) -> tuple[float, int]:
    """Best (scale, zero) for one flat array of weights."""
    maxq = (1 << bits) - 1
    lo, hi = float(w.min()), float(w.max())
    if lo == hi:
        # degenerate range: unit scale, zero offset; the rounding error is reported, not hidden
        return 1.0, 0
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    best = None
    # descending alpha so ties keep the larger clip range
    for k in range(steps, 0, -1):
        alpha = k / steps
        s = (alpha * hi - alpha * lo) / maxq
        z = int(np.clip(round_half_away(-alpha * lo / s), 0, maxq))
        q = np.clip(round_half_away(w / s) + z, 0, maxq)
        err = float(np.sum((w - s * (q - z)) ** 2))
        if best is None or err < best[0]:
            best = (err, s, z)
    return best[1], best[2]


def grid_search(w, bits: int, granularity: str = "per-matrix", steps: int = 100) -> QuantGrid:
    """Pick scale and zero point minimizing ``||W - quant(W)||_F^2``.

    Candidates shrink the clip range ``[min, max]`` (widened to contain 0) by
    ``alpha = k / steps`` for ``k = 1..steps``; the zero point is derived from
    the clipped minimum.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    w = np.asarray(w, dtype=np.float64)
    if w.size == 0:
        raise ValueError("cannot fit a grid to an empty matrix")
    if granularity == "per-matrix":
        s, z = _alpha_search(w.ravel(), bits, steps)
        return QuantGrid(bits, s, z, granularity)
    if granularity == "per-row":
        params = [_alpha_search(row, bits, steps) for row in np.atleast_2d(w)]
        return QuantGrid(bits, [p[0] for p in params], [p[1] for p in params], granularity)
    raise ValueError(f"granularity must be one of {GRANULARITIES}")


def reconstruction_error(w, g: QuantGrid) -> float:
    w = np.asarray(w, dtype=np.float64)
    return float(np.sum((w - g.quantize(w)[1]) ** 2))
