"""``septq`` command line: quantize, score, compare, dequantize, oracle.

Exit codes: 0 success, 1 oracle check failed, 2 missing/unreadable input,
3 shape mismatch, 4 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .engine import EngineConfig, inverse_hessian_factor, layer_error, run_gptq, run_septq
from .importance import log_bin_edges, mask_block_sums, score_all, score_histogram, select_mask
from .grid import grid_search
from .linalg import DimensionMismatchError
from .matio import FORMATS, MatrixFormatError, read_matrix, write_matrix
from .oracles import rtn_baseline, write_reports
from .serialize import dequantize_dir, save_result
from .suites import THRESHOLDS, compare_strategies, failing, oracle_suite

log = logging.getLogger("septq")

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_SHAPE, EXIT_CONFIG = 0, 1, 2, 3, 4

# flag name -> EngineConfig field
_FLAG_FIELDS = {
    "bits": "bits",
    "p": "p",
    "blocksize": "blocksize",
    "damping": "damping_frac",
    "grid_steps": "grid_steps",
    "granularity": "granularity",
    "strategy_timing": "timing",
    "strategy_scope": "scope",
    "local_block": "local_block",
}


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def load_config(args) -> EngineConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as f:
                values = json.load(f)
        except FileNotFoundError:
            raise CliError(EXIT_INPUT, f"config file not found: {args.config}")
        except json.JSONDecodeError as e:
            raise CliError(EXIT_CONFIG, f"config is not valid JSON: {e}")
        if not isinstance(values, dict):
            raise CliError(EXIT_CONFIG, "config must be a JSON object")
        known = {f.name for f in fields(EngineConfig)}
        unknown = set(values) - known
        if unknown:
            raise CliError(EXIT_CONFIG, f"unknown config keys: {sorted(unknown)}")
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    try:
        return EngineConfig(**values)
    except (TypeError, ValueError) as e:
        raise CliError(EXIT_CONFIG, f"invalid config: {e}")


def _read(path, fmt):
    if not os.path.exists(path):
        raise CliError(EXIT_INPUT, f"no such file: {path}")
    try:
        return read_matrix(path, fmt)
    except (OSError, MatrixFormatError) as e:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {e}")


def _load_pair(args):
    w = _read(args.weights, args.format)
    x = _read(args.calib, args.format)
    if w.shape[1] != x.shape[0]:
        raise CliError(EXIT_SHAPE, f"weights are {w.shape[0]}x{w.shape[1]} but calibration set is {x.shape[0]}x{x.shape[1]}")
    return w, x


def _write_manifest(args, cfg: EngineConfig | None, inputs: dict) -> None:
    manifest = {
        "command": args.command,
        "inputs": inputs,
        "config": cfg.to_json() if cfg else None,
        "output_dir": args.out,
        "seed": args.seed,
        "tool_version": __version__,
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in r])


def cmd_quantize(args) -> int:
    cfg = load_config(args)
    w, x = _load_pair(args)
    os.makedirs(args.out, exist_ok=True)
    res = run_septq(w, x, cfg)
    extra = {"rtn_error": layer_error(w, rtn_baseline(w, res.grid).w_hat, x)}
    if args.with_gptq:
        extra["gptq_error"] = run_gptq(w, x, cfg, grid=res.grid).metrics["layer_error"]
    save_result(res, args.out, extra)
    _write_manifest(args, cfg, {"weights": args.weights, "calib": args.calib})
    m = res.metrics
    log.info("layer_error=%.6g reserved=%d bits(paper)=%s", m["layer_error"], m["reserved_count"], m["effective_bits_paper"])
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = load_config(args)
    w, x = _load_pair(args)
    os.makedirs(args.out, exist_ok=True)
    grid = grid_search(w, cfg.bits, cfg.granularity, cfg.grid_steps)
    hinv, _ = inverse_hessian_factor(x, cfg.damping_frac)
    scores = score_all(w, 2.0 * np.diag(hinv), grid)
    edges = log_bin_edges(scores, args.bins)
    counts, frac = score_histogram(scores, edges)
    _write_rows(
        os.path.join(args.out, "histogram.csv"),
        ["bin_low", "bin_high", "count", "mass_fraction"],
        [(float(edges[k]), float(edges[k + 1]), int(counts[k]), float(frac[k])) for k in range(len(counts))],
    )
    sums = mask_block_sums(select_mask(scores, cfg.strategy), args.mask_block)
    _write_rows(
        os.path.join(args.out, "block_sums.csv"),
        ["block_row", "block_col", "sum"],
        [(r, c, int(sums[r, c])) for r in range(sums.shape[0]) for c in range(sums.shape[1])],
    )
    _write_manifest(args, cfg, {"weights": args.weights, "calib": args.calib})
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args)
    w, x = _load_pair(args)
    os.makedirs(args.out, exist_ok=True)
    rows = compare_strategies(w, x, cfg)
    header = list(rows[0])
    _write_rows(os.path.join(args.out, "comparison.csv"), header, [[r[k] for k in header] for r in rows])
    _write_manifest(args, cfg, {"weights": args.weights, "calib": args.calib})
    return EXIT_OK


def cmd_dequantize(args) -> int:
    if not os.path.isdir(args.result_dir):
        raise CliError(EXIT_INPUT, f"no such result directory: {args.result_dir}")
    try:
        w_hat = dequantize_dir(args.result_dir)
    except (OSError, MatrixFormatError, KeyError, ValueError) as e:
        raise CliError(EXIT_INPUT, f"cannot load {args.result_dir}: {e}")
    write_matrix(w_hat, args.out, args.format)
    return EXIT_OK


def cmd_oracle(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    reports = oracle_suite(args.n_delta, args.n_score, args.n_block)
    write_reports(reports, os.path.join(args.out, "oracle_report.csv"))
    bad = failing(reports)
    summary = {}
    for q, thr in THRESHOLDS.items():
        sel = [r for r in reports if r.quantity == q]
        summary[q] = {
            "instances": len(sel),
            "max_rel_err": max((r.rel_err for r in sel), default=0.0),
            "threshold": thr,
            "failed": sum(1 for r in sel if not r.rel_err < thr),
        }
    summary["pass"] = not bad
    with open(os.path.join(args.out, "oracle_summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(args, None, {})
    for q, s in summary.items():
        if q != "pass":
            print(f"{'PASS' if not s['failed'] else 'FAIL'} {q}: max rel_err {s['max_rel_err']:.3e} (< {s['threshold']:g}) over {s['instances']} instances")
    return EXIT_OK if not bad else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="septq", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def engine_flags(p):
        p.add_argument("--weights", required=True)
        p.add_argument("--calib", required=True, help="calibration inputs, cols x n")
        p.add_argument("--out", required=True)
        p.add_argument("--config", help="JSON file with engine settings; flags override it")
        p.add_argument("--bits", type=int)
        p.add_argument("--p", type=float, help="percent of weights kept in full precision")
        p.add_argument("--blocksize", type=int)
        p.add_argument("--damping", type=float)
        p.add_argument("--grid-steps", type=int)
        p.add_argument("--granularity", choices=("per-matrix", "per-row"))
        p.add_argument("--strategy-timing", choices=("static", "dynamic"))
        p.add_argument("--strategy-scope", choices=("global", "local"))
        p.add_argument("--local-block", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=FORMATS, help="input format (default: from extension)")

    q = sub.add_parser("quantize", help="quantize one weight matrix")
    engine_flags(q)
    q.add_argument("--with-gptq", action="store_true", help="also report the no-reservation error")
    q.set_defaults(func=cmd_quantize)

    s = sub.add_parser("score", help="importance histogram and mask block sums")
    engine_flags(s)
    s.add_argument("--bins", type=int, default=20)
    s.add_argument("--mask-block", type=int, default=128)
    s.set_defaults(func=cmd_score)

    c = sub.add_parser("compare", help="methods and strategy ablation on one layer")
    engine_flags(c)
    c.set_defaults(func=cmd_compare)

    d = sub.add_parser("dequantize", help="rebuild weights from a result directory")
    d.add_argument("result_dir")
    d.add_argument("--out", required=True)
    d.add_argument("--format", choices=FORMATS)
    d.set_defaults(func=cmd_dequantize)

    o = sub.add_parser("oracle", help="closed forms vs brute-force references")
    o.add_argument("--out", required=True)
    o.add_argument("--seed", type=int, default=0, help="recorded only; seed lists are fixed")
    o.add_argument("--n-delta", type=int)
    o.add_argument("--n-score", type=int)
    o.add_argument("--n-block", type=int)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"septq: {e}", file=sys.stderr)
        return e.code
    except DimensionMismatchError as e:
        print(f"septq: {e}", file=sys.stderr)
        return EXIT_SHAPE


if __name__ == "__main__":
    sys.exit(main())
