"""Replay the six-node two-destination example and print each slot's ledger."""

from obsta.harness import run_algorithm
from obsta.oracle import offline_optimum
from obsta.scenario import toy_example


def main():
    sc = toy_example()
    for algo in ("obsta", "spt", "st"):
        run = run_algorithm(sc, algo)
        print(f"== {algo}")
        for r in run.reports:
            print(
                f"  slot {r.slot}: tree {r.tree_cost:g}  branches {r.branch_cost}  "
                f"rc {r.rerouting_cost:g}  total {r.total:.10g}  deposit {r.deposit:.10g}  prc {r.prc:g}"
            )
        print(f"  cumulative {run.cumulative('total'):.10g}")
    opt = offline_optimum(sc)
    print(f"offline optimum {opt.cost:.10g}; slot costs {[round(c, 9) for c in opt.slot_costs]}")


if __name__ == "__main__":
    main()
