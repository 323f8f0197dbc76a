"""Strategy ablation on clustered 256x256 layers: static vs dynamic timing, global vs local scope.

Writes one comparison row per (seed, variant). Takes a few seconds per instance.

    python3 scripts/run_ablation.py --n 3 --out results/ablation.csv
"""

import argparse
import csv
import os

from septq import instances as ins
from septq.engine import EngineConfig
from septq.suites import compare_strategies


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/ablation.csv")
    ap.add_argument("--n", type=int, default=len(ins.ABLATION_SEEDS), help="number of seeded instances")
    ap.add_argument("--p", type=float, default=1.0)
    ap.add_argument("--local-block", type=int, default=128)
    args = ap.parse_args()

    cfg = EngineConfig(bits=2, p=args.p, local_block=args.local_block)
    rows = []
    for sd in list(ins.ABLATION_SEEDS)[: args.n]:
        rng = ins.rng_for(sd)
        w, x = ins.clustered_weights(rng, 256, 256), ins.calibration(rng, 256, 512)
        for row in compare_strategies(w, x, cfg):
            rows.append({"seed": sd, **row})
            print(f"{sd} {row['variant']:<22} err {row['layer_error']:12.2f}  t {row['runtime_seconds']:.3f}s  mass {row['score_mass']:.2f}")

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", newline="") as f:
        wr = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
        wr.writeheader()
        wr.writerows(rows)


if __name__ == "__main__":
    main()
