"""Seeded comparison runs shared by the CLI, the acceptance tests and scripts/."""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from . import instances as ins
from .engine import EngineConfig, inverse_hessian_factor, obs_delta, run_gptq, run_septq
from .grid import grid_search
from .importance import StrategyConfig, dynamic_mask_trace, score_all, score_mass, select_mask, select_mask_local
from .linalg import hessian, spd_inverse
from .oracles import OracleReport, kkt_delta_oracle, rtn_baseline, score_oracle, unblocked_reference

THRESHOLDS = {"delta": 1e-8, "score": 1e-6, "layer_error": 1e-8}


def delta_reports(seeds=ins.DELTA_SEEDS) -> list[OracleReport]:
    """Closed-form compensation vs the bordered KKT solve on random SPD Hessians (dims 4-32)."""
    out = []
    for sd in seeds:
        rng = ins.rng_for(sd)
        n = int(rng.integers(4, 33))
        h = ins.random_spd(rng, n)
        j = int(rng.integers(n))
        gap = float(rng.normal())
        out.append(OracleReport.compare(sd, "delta", obs_delta(spd_inverse(h), j, gap), kkt_delta_oracle(h, j, gap)))
    return out


def score_instance(sd: int):
    rng = ins.rng_for(sd)
    rows = int(rng.integers(2, 17))
    cols = int(rng.integers(2, 17))
    n = int(rng.integers(2 * cols, 65))
    w = rng.normal(size=(rows, cols))
    x = ins.well_conditioned_calibration(rng, cols, n)
    return w, x, grid_search(w, 2)


def score_reports(seeds=ins.SCORE_SEEDS) -> list[OracleReport]:
    """Closed-form scores (undamped) vs the exact single-weight re-fit objective, every entry."""
    out = []
    for sd in seeds:
        w, x, g = score_instance(sd)
        closed = score_all(w, 2.0 * np.diag(spd_inverse(hessian(x, 0.0))), g)
        brute = np.array([[score_oracle(w, x, g, i, j) for j in range(w.shape[1])] for i in range(w.shape[0])])
        out.append(OracleReport.compare(sd, "score", closed, brute, elementwise=True))
    return out


def blocksize_instance(sd: int):
    rng = ins.rng_for(sd)
    return ins.heavy_tailed_weights(rng, 16, 16), ins.calibration(rng, 16, 64)


def blocksize_reports(seeds=ins.BLOCKSIZE_SEEDS, cfg: EngineConfig | None = None) -> list[OracleReport]:
    """Blocked engine layer error vs the unblocked explicit-inverse reference."""
    cfg = cfg or EngineConfig(bits=2, p=1.0, blocksize=4)
    out = []
    for sd in seeds:
        w, x = blocksize_instance(sd)
        res = run_septq(w, x, cfg)
        ref = unblocked_reference(w, x, res.mask, res.grid, cfg.damping_frac)
        out.append(OracleReport.compare(sd, "layer_error", res.metrics["layer_error"], ref.metrics["layer_error"]))
    return out


def oracle_suite(n_delta=None, n_score=None, n_block=None) -> list[OracleReport]:
    pick = lambda seeds, n: seeds if n is None else seeds[:n]
    return (
        delta_reports(pick(ins.DELTA_SEEDS, n_delta))
        + score_reports(pick(ins.SCORE_SEEDS, n_score))
        + blocksize_reports(pick(ins.BLOCKSIZE_SEEDS, n_block))
    )


def failing(reports) -> list[OracleReport]:
    return [r for r in reports if not r.rel_err < THRESHOLDS[r.quantity]]


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def static_scoring(w, hinv, grid, strat: StrategyConfig):
    return select_mask(score_all(w, 2.0 * np.diag(hinv), grid), strat)


def compare_strategies(w, x, cfg: EngineConfig) -> list[dict]:
    """Rows for the full method/strategy comparison on one layer.

    Scoring timings exclude the shared Hessian factorization; ``score_mass``
    is the static score mass each mask captures.
    """
    w = np.asarray(w, dtype=np.float64)
    grid = grid_search(w, cfg.bits, cfg.granularity, cfg.grid_steps)
    hinv, upper = inverse_hessian_factor(x, cfg.damping_frac)
    scores = score_all(w, 2.0 * np.diag(hinv), grid)
    strat = replace(cfg, timing="static", scope="global").strategy

    static_mask, t_static = timed(static_scoring, w, hinv, grid, strat)
    dyn_mask, t_dyn = timed(dynamic_mask_trace, w, upper, grid, replace(strat, timing="dynamic"))
    local_mask = select_mask_local(scores, replace(strat, scope="local"))

    septq = run_septq(w, x, cfg, grid=grid, mask=static_mask)
    gptq = run_gptq(w, x, cfg, grid=grid)
    rtn = rtn_baseline(w, grid, x)
    dyn = run_septq(w, x, cfg, grid=grid, mask=dyn_mask)
    local = run_septq(w, x, cfg, grid=grid, mask=local_mask)

    def row(name, layer_err, runtime, mask):
        return {
            "variant": name,
            "layer_error": float(layer_err),
            "runtime_seconds": float(runtime),
            "reserved_count": int(np.sum(mask)),
            "score_mass": score_mass(scores, mask),
        }

    zero = np.zeros(w.shape, dtype=bool)
    return [
        row("septq", septq.metrics["layer_error"], septq.metrics["runtime_seconds"], static_mask),
        row("gptq", gptq.metrics["layer_error"], gptq.metrics["runtime_seconds"], zero),
        row("rtn", rtn.metrics["layer_error"], 0.0, zero),
        row("static-global-scoring", septq.metrics["layer_error"], t_static, static_mask),
        row("dynamic-scoring", dyn.metrics["layer_error"], t_dyn, dyn_mask),
        row("static-local", local.metrics["layer_error"], 0.0, local_mask),
    ]
