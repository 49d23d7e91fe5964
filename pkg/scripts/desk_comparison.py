"""Seeded 200-node comparison of OBSTA against the SPT and ST baselines.

Writes per-seed CSVs, summary.json and compare.csv under --out.
"""

import argparse

from obsta.harness import RunConfig, compare
from obsta.scenario import RandomParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--beta", type=float, default=0.6)
    args = ap.parse_args()

    params = RandomParams(nodes=200, edge_density=0.03, group_size=30, churn=0.3, n_slots=100)
    cfg = RunConfig(generator=params, seeds=tuple(range(args.seeds)), alpha=args.alpha, beta=args.beta, out=args.out)
    batch, rows = compare(cfg)
    for r in rows:
        print(f"{r.numerator}/{r.denominator:<4} {r.metric:<15} ratio of means {r.ratio_of_means:8.4f}   mean of ratios {r.mean_of_ratios:8.4f}")
    return batch.exit_status


if __name__ == "__main__":
    raise SystemExit(main())
