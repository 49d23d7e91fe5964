"""Per-slot wall time of OBSTA and the recomputing ST baseline on a 1000-node graph."""

import argparse
import time

from obsta.harness import run_algorithm
from obsta.scenario import RandomParams, generate_random_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--group", type=int, default=50)
    ap.add_argument("--slots", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    density = 6.0 / args.nodes
    params = RandomParams(nodes=args.nodes, edge_density=density, group_size=args.group, n_slots=args.slots)
    sc = generate_random_scenario(params, seed=args.seed)
    print(f"{len(sc.graph)} nodes, {sc.graph.num_edges} edges, {sc.n_slots} slots, peak group {sc.d_max}")
    for algo in ("obsta", "st", "spt"):
        t0 = time.perf_counter()
        run = run_algorithm(sc, algo)
        secs = time.perf_counter() - t0
        print(f"{algo:<6} {secs:7.2f} s total  {run.mean_slot_ms():8.2f} ms/slot  cumulative total {run.cumulative('total'):.1f}")
        if algo == "obsta":
            for phase, s in sorted(run.phase_seconds.items()):
                print(f"         {phase:<15} {s:6.2f} s")


if __name__ == "__main__":
    main()
