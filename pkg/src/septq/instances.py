"""Seeded synthetic layers for tests, experiments and the demo files."""

from __future__ import annotations

import numpy as np

# Seed lists are fixed so oracle and statistical runs reproduce exactly.
DELTA_SEEDS = tuple(range(1000, 1100))
SCORE_SEEDS = tuple(range(2000, 2100))
BLOCKSIZE_SEEDS = tuple(range(3000, 3020))
DOMINANCE_SEEDS = tuple(range(4000, 4200))
ABLATION_SEEDS = tuple(range(5000, 5010))
DEMO_SEED = 16


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n))
    return a.T @ a + np.eye(n)


def calibration(rng: np.random.Generator, dim: int, n: int) -> np.ndarray:
    """Gaussian inputs with log-normal per-feature scales (a few loud channels)."""
    scales = rng.lognormal(0.0, 0.5, size=(dim, 1))
    return rng.normal(size=(dim, n)) * scales


def heavy_tailed_weights(rng: np.random.Generator, rows: int, cols: int, outlier_frac: float = 0.02) -> np.ndarray:
    """Unit Gaussian weights with a sprinkling of Student-t(2) outliers."""
    w = rng.normal(size=(rows, cols))
    n_out = max(1, int(round(outlier_frac * rows * cols)))
    idx = rng.choice(rows * cols, size=n_out, replace=False)
    w.flat[idx] = rng.standard_t(2.0, size=n_out) * 4.0
    return w


def clustered_weights(rng: np.random.Generator, rows: int, cols: int, hot_rows: int = 4, hot_cols: int = 4) -> np.ndarray:
    """Heavy-tailed weights whose outliers concentrate in a few rows and columns."""
    w = rng.normal(size=(rows, cols)) * 0.5
    r = rng.choice(rows, size=hot_rows, replace=False)
    c = rng.choice(cols, size=hot_cols, replace=False)
    w[r, :] += rng.standard_t(2.0, size=(hot_rows, cols)) * 2.0
    w[:, c] += rng.standard_t(2.0, size=(rows, hot_cols)) * 2.0
    return w


def well_conditioned_calibration(rng: np.random.Generator, dim: int, n: int, max_cond: float = 1e4) -> np.ndarray:
    """Calibration inputs with ``cond(X X^T) <= max_cond`` (redrawn until it holds)."""
    while True:
        x = calibration(rng, dim, n)
        if np.linalg.cond(x @ x.T) <= max_cond:
            return x


def demo_instance() -> tuple[np.ndarray, np.ndarray]:
    """The 16x16 layer with 64 calibration samples shipped under ``data/``."""
    rng = rng_for(DEMO_SEED)
    w = heavy_tailed_weights(rng, 16, 16)
    x = calibration(rng, 16, 64)
    return w, x
