"""Command-line entry point.

Exit status: 0 on success, 2 for invalid input, 3 when an algorithm
invariant failed (a ``violation.json`` is written next to the reports).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from obsta.graph import GraphError
from obsta.harness import ALGORITHMS, RunConfig, check_bound, compare, run
from obsta.oracle import OracleBudgetError, offline_optimum
from obsta.scenario import (
    HardnessParams,
    RandomParams,
    ScenarioError,
    toy_example,
    generate_hardness_instance,
    generate_random_scenario,
    load_scenario,
    path_graph,
    save_scenario,
)

log = logging.getLogger("obsta")

EXIT_INVALID = 2


def _algos(text: str) -> list[str]:
    out = [a.strip() for a in text.split(",") if a.strip()]
    bad = [a for a in out if a not in ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown algorithms {bad}; choose from {','.join(ALGORITHMS)}")
    return out


def _seeds(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    d = RandomParams()
    p.add_argument("--nodes", type=int, default=d.nodes)
    p.add_argument("--density", type=float, default=d.edge_density, help="probability of each extra edge")
    p.add_argument("--group", type=int, default=d.group_size, help="number of candidate destinations")
    p.add_argument("--churn", type=float, default=d.churn)
    p.add_argument("--slots", type=int, default=d.n_slots)


def _generator(args: argparse.Namespace) -> RandomParams:
    return RandomParams(
        nodes=args.nodes,
        edge_density=args.density,
        group_size=args.group,
        churn=args.churn,
        n_slots=args.slots,
    )


def _add_run_flags(p: argparse.ArgumentParser, default_algos: str) -> None:
    p.add_argument("--scenario", help="scenario header JSON; without it a random scenario is generated per seed")
    p.add_argument("--algo", type=_algos, default=_algos(default_algos))
    p.add_argument("--out", default="out")
    p.add_argument("--seed", "--seeds", dest="seeds", type=_seeds, default=[0])
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--selection-prc-sign", type=int, choices=(1, -1))
    p.add_argument("--selection-prc-beta", choices=("on", "off"))
    p.add_argument("--stable-sort", choices=("si", "rt_distance"))
    p.add_argument("--horizon", choices=("known", "sliding"), default="known")
    _add_generator_flags(p)


def _config(args: argparse.Namespace) -> RunConfig:
    seeds = args.seeds
    if args.scenario is None and args.repeat > 1 and len(seeds) == 1:
        seeds = list(range(seeds[0], seeds[0] + args.repeat))
    return RunConfig(
        scenario=args.scenario,
        generator=None if args.scenario else _generator(args),
        algorithms=args.algo,
        out=args.out,
        seeds=seeds,
        repeat=args.repeat if args.scenario else 1,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        threshold=args.threshold,
        selection_prc_sign=args.selection_prc_sign,
        selection_prc_beta=None if args.selection_prc_beta is None else args.selection_prc_beta == "on",
        stable_sort=args.stable_sort,
        horizon=args.horizon,
    )


def cmd_run(args: argparse.Namespace) -> int:
    batch = run(_config(args))
    for v in batch.violations():
        log.error("invariant violation: %s", v["message"])
    return batch.exit_status


def cmd_compare(args: argparse.Namespace) -> int:
    batch, rows = compare(_config(args))
    for r in rows:
        print(f"{r.numerator}/{r.denominator} {r.metric}: mean of ratios {r.mean_of_ratios:.4f}, ratio of means {r.ratio_of_means:.4f}")
    return batch.exit_status


def cmd_generate(args: argparse.Namespace) -> int:
    if args.kind == "toy":
        sc = toy_example()
    elif args.kind == "random":
        sc = generate_random_scenario(_generator(args), seed=args.seed)
    else:
        hp = HardnessParams(path_graph(args.m), "h0", args.p, seed=args.seed)
        sc = generate_hardness_instance(hp)
    path = save_scenario(sc, args.out, args.name)
    print(path)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    res = offline_optimum(load_scenario(args.scenario))
    print(json.dumps({
        "optimum": res.cost,
        "slot_costs": list(res.slot_costs),
        "trees": [sorted([u, v] for u, v in t.edges) for t in res.trees],
    }, indent=2))
    return 0


def cmd_check_bound(args: argparse.Namespace) -> int:
    rep = check_bound(load_scenario(args.scenario), horizon=args.horizon)
    print(json.dumps({**asdict(rep), "ok": rep.ok}, indent=2))
    return 0 if rep.ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obsta", description="Online branch-aware multicast tree routing experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a scenario and write per-slot reports")
    _add_run_flags(p, "obsta,spt,st")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run and write metric ratios against OBSTA")
    _add_run_flags(p, "obsta,spt,st")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="write a scenario to disk")
    p.add_argument("kind", choices=("random", "hardness", "toy"))
    p.add_argument("--out", default=".")
    p.add_argument("--name", default="scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=2, help="hardness: path length of the base graph")
    p.add_argument("--p", type=int, default=1, help="hardness: clone exponent")
    _add_generator_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle", help="offline optimum of a tiny scenario")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check-bound", help="OBSTA total against budget and the offline optimum")
    p.add_argument("--scenario", required=True)
    p.add_argument("--horizon", choices=("known", "sliding"), default="known")
    p.set_defaults(func=cmd_check_bound)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, GraphError, OracleBudgetError, ValueError, OSError) as e:
        log.error("%s", e)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
