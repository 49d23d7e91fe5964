"""Replay scenarios through OBSTA and the baselines; write per-slot CSV and summaries."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

from obsta.baselines import BaselineKind, BaselineRun
from obsta.cost import CostKnobs, EPS, SlotLedger
from obsta.engine import EngineOptions, InvariantViolation, ObstaProblem, SlotState, step
from obsta.graph import global_spt
from obsta.scenario import RandomParams, Scenario, generate_random_scenario

ALGORITHMS = ("obsta", "spt", "st")
CSV_COLUMNS = (
    "slot",
    "algorithm",
    "tree_cost",
    "branch_cost",
    "rerouting_cost",
    "budget",
    "slot_budget",
    "deposit",
    "prc",
    "total",
    "cumulative_total",
)
METRICS = ("total", "tree_cost", "branch_cost", "rerouting_cost")


@dataclass(frozen=True)
class SlotReport:
    slot: int
    algorithm: str
    tree_cost: float
    branch_cost: int
    rerouting_cost: float
    budget: float
    slot_budget: float
    deposit: float
    prc: float
    total: float
    cumulative_total: float
    wall_time_ms: float = 0.0

    @classmethod
    def from_ledger(cls, algo: str, led: SlotLedger, cumulative: float, ms: float) -> SlotReport:
        return cls(
            led.slot,
            algo,
            led.tree_cost,
            led.branch_cost,
            led.rerouting_cost,
            led.budget,
            led.slot_budget,
            led.deposit,
            led.potential_rc,
            led.total,
            cumulative,
            ms,
        )

    def row(self) -> list[str]:
        return [repr(getattr(self, c)) if isinstance(getattr(self, c), float) else str(getattr(self, c)) for c in CSV_COLUMNS]


@dataclass
class AlgoRun:
    algorithm: str
    reports: list[SlotReport] = field(default_factory=list)
    phase_seconds: dict[str, float] = field(default_factory=dict)
    deposit_ok: bool = True
    budget_ok: bool = True
    feasible: bool = True
    violation: dict | None = None

    def cumulative(self, metric: str) -> float:
        return math.fsum(getattr(r, metric) for r in self.reports)

    @property
    def ok(self) -> bool:
        return self.violation is None and self.deposit_ok and self.budget_ok and self.feasible

    def mean_slot_ms(self) -> float:
        return math.fsum(r.wall_time_ms for r in self.reports) / len(self.reports) if self.reports else 0.0

    def summary(self) -> dict:
        out = {f"cumulative_{m}": self.cumulative(m) for m in METRICS}
        out["budget_sum"] = self.cumulative("budget")
        out["slot_budget_sum"] = self.cumulative("slot_budget")
        out["slots"] = len(self.reports)
        out["mean_slot_ms"] = self.mean_slot_ms()
        out["slot_ms"] = [r.wall_time_ms for r in self.reports]
        if self.algorithm == "obsta":
            out["feasible"] = self.feasible
            out["deposit_sufficient"] = self.deposit_ok
            out["budget_dominates"] = self.budget_ok
            out["phase_seconds"] = self.phase_seconds
        if self.violation is not None:
            out["violation"] = self.violation["message"]
        return out


def horizon_for(scenario: Scenario, mode: str) -> int | None:
    if mode == "known":
        return scenario.n_slots
    if mode == "sliding":
        return None
    raise ValueError(f"horizon mode must be 'known' or 'sliding', got {mode!r}")


def run_obsta(scenario: Scenario, *, horizon: str = "known", strict: bool = True) -> AlgoRun:
    spt = global_spt(scenario.graph, scenario.source, scenario.candidates)
    problem = ObstaProblem(spt, scenario.knobs, scenario.options, horizon_for(scenario, horizon))
    state = SlotState.initial(scenario.source)
    run = AlgoRun("obsta")
    cum = 0.0
    for ev in scenario.slots:
        t0 = time.perf_counter()
        try:
            state, res = step(problem, state, ev.joins, ev.leaves, strict=strict)
        except InvariantViolation as e:
            run.violation = {
                "algorithm": "obsta",
                "slot": e.slot,
                "message": str(e),
                "candidates": [c.summary() for c in e.candidates],
            }
            break
        ms = (time.perf_counter() - t0) * 1e3
        for k, v in res.timings.items():
            run.phase_seconds[k] = run.phase_seconds.get(k, 0.0) + v
        run.feasible &= res.feasible
        run.deposit_ok &= res.deposit_ok
        run.budget_ok &= res.budget_ok
        cum += res.ledger.total
        run.reports.append(SlotReport.from_ledger("obsta", res.ledger, cum, ms))
    return run


def run_baseline(scenario: Scenario, kind: BaselineKind) -> AlgoRun:
    spt = global_spt(scenario.graph, scenario.source, scenario.candidates)
    runner = BaselineRun(kind, spt, scenario.knobs)
    run = AlgoRun(kind.value)
    cum = 0.0
    for dests in scenario.memberships():
        t0 = time.perf_counter()
        led = runner.step(dests)
        ms = (time.perf_counter() - t0) * 1e3
        cum += led.total
        run.reports.append(SlotReport.from_ledger(kind.value, led, cum, ms))
    return run


def run_algorithm(scenario: Scenario, algo: str, *, horizon: str = "known", strict: bool = True) -> AlgoRun:
    if algo == "obsta":
        return run_obsta(scenario, horizon=horizon, strict=strict)
    if algo in ("spt", "st"):
        return run_baseline(scenario, BaselineKind(algo))
    raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")


def write_csv(path: str, runs: Iterable[AlgoRun]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for run in runs:
            for r in run.reports:
                w.writerow(r.row())


def read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class RunConfig:
    """One batch of runs: either a scenario file or generated scenarios per seed."""

    scenario: str | None = None
    generator: RandomParams | None = None
    algorithms: Sequence[str] = ALGORITHMS
    out: str = "out"
    seeds: Sequence[int] = (0,)
    repeat: int = 1
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    threshold: float | None = None
    selection_prc_sign: int | None = None
    selection_prc_beta: bool | None = None
    stable_sort: str | None = None
    horizon: str = "known"

    def __post_init__(self) -> None:
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if (self.scenario is None) == (self.generator is None):
            raise ValueError("give exactly one of a scenario file or generator parameters")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")
        if self.horizon not in ("known", "sliding"):
            raise ValueError(f"horizon mode must be 'known' or 'sliding', got {self.horizon!r}")

    def apply_overrides(self, sc: Scenario) -> Scenario:
        k = sc.knobs
        knobs = CostKnobs(
            alpha=k.alpha if self.alpha is None else self.alpha,
            beta=k.beta if self.beta is None else self.beta,
            gamma=k.gamma if self.gamma is None else self.gamma,
            stability_threshold=k.stability_threshold if self.threshold is None else self.threshold,
        )
        o = sc.options
        opts = EngineOptions(
            selection_prc_sign=o.selection_prc_sign if self.selection_prc_sign is None else self.selection_prc_sign,
            selection_prc_beta=o.selection_prc_beta if self.selection_prc_beta is None else self.selection_prc_beta,
            stable_sort=o.stable_sort if self.stable_sort is None else self.stable_sort,
        )
        return replace(sc, knobs=knobs, options=opts)

    def scenarios(self) -> list[tuple[str, Scenario]]:
        """Labelled scenarios to run; labels name output subdirectories."""
        from obsta.scenario import load_scenario

        if self.scenario is not None:
            base = self.apply_overrides(load_scenario(self.scenario))
            if self.repeat == 1:
                return [("", base)]
            return [(f"run_{k}", base) for k in range(1, self.repeat + 1)]
        assert self.generator is not None
        out = []
        for s in self.seeds:
            sc = generate_random_scenario(self.generator, seed=s)
            out.append((f"seed_{s}" if len(self.seeds) > 1 else "", self.apply_overrides(sc)))
        return out


@dataclass
class BatchResult:
    runs: dict[str, dict[str, AlgoRun]]
    exit_status: int

    def violations(self) -> list[dict]:
        return [r.violation for by in self.runs.values() for r in by.values() if r.violation]


def run_scenario(scenario: Scenario, algorithms: Sequence[str], *, horizon: str = "known") -> dict[str, AlgoRun]:
    return {a: run_algorithm(scenario, a, horizon=horizon) for a in algorithms}


def write_reports(directory: str, runs: dict[str, AlgoRun]) -> None:
    os.makedirs(directory, exist_ok=True)
    for algo, run in runs.items():
        write_csv(os.path.join(directory, f"{algo}.csv"), [run])
        if run.violation is not None:
            with open(os.path.join(directory, "violation.json"), "w") as fh:
                json.dump(run.violation, fh, indent=2, sort_keys=True)
    with open(os.path.join(directory, "summary.json"), "w") as fh:
        json.dump({a: r.summary() for a, r in runs.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(config: RunConfig) -> BatchResult:
    results: dict[str, dict[str, AlgoRun]] = {}
    for label, sc in config.scenarios():
        runs = run_scenario(sc, config.algorithms, horizon=config.horizon)
        write_reports(os.path.join(config.out, label) if label else config.out, runs)
        results[label] = runs
    if len(results) > 1:
        with open(os.path.join(config.out, "summary.json"), "w") as fh:
            json.dump(
                {label: {a: r.summary() for a, r in by.items()} for label, by in results.items()},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
    failed = any(not r.ok for by in results.values() for r in by.values())
    return BatchResult(results, 3 if failed else 0)


def safe_ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


@dataclass(frozen=True)
class Comparison:
    metric: str
    numerator: str
    denominator: str
    n: int
    numerator_mean: float
    denominator_mean: float
    mean_of_ratios: float
    ratio_of_means: float


def compare_totals(
    totals: Sequence[dict[str, dict[str, float]]],
    pairs: Sequence[tuple[str, str]],
    metrics: Sequence[str] = METRICS,
) -> list[Comparison]:
    """``totals[k][algo][metric]`` holds one scenario's cumulative metric."""
    out = []
    for num, den in pairs:
        for m in metrics:
            xs = [t[num][m] for t in totals]
            ys = [t[den][m] for t in totals]
            n = len(xs)
            if n == 0:
                raise ValueError("nothing to compare")
            ratios = [safe_ratio(x, y) for x, y in zip(xs, ys)]
            mx, my = math.fsum(xs) / n, math.fsum(ys) / n
            out.append(Comparison(m, num, den, n, mx, my, math.fsum(ratios) / n, safe_ratio(mx, my)))
    return out


def totals_of(runs: dict[str, AlgoRun]) -> dict[str, dict[str, float]]:
    return {a: {m: r.cumulative(m) for m in METRICS} for a, r in runs.items()}


def default_pairs(algorithms: Sequence[str]) -> list[tuple[str, str]]:
    if "obsta" in algorithms:
        pairs = [("obsta", a) for a in algorithms if a != "obsta"]
    else:
        pairs = [(a, b) for i, a in enumerate(algorithms) for b in algorithms[i + 1:]]
    if not pairs:
        raise ValueError("comparison needs at least two algorithms")
    return pairs


def write_compare(path: str, rows: Sequence[Comparison]) -> None:
    cols = list(Comparison.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else str(v) for v in asdict(r).values()])


def compare(config: RunConfig, pairs: Sequence[tuple[str, str]] | None = None) -> tuple[BatchResult, list[Comparison]]:
    pairs = list(pairs) if pairs is not None else default_pairs(config.algorithms)
    batch = run(config)
    rows = compare_totals([totals_of(by) for by in batch.runs.values()], pairs)
    write_compare(os.path.join(config.out, "compare.csv"), rows)
    return batch, rows


@dataclass(frozen=True)
class BoundReport:
    obsta_total: float
    budget_sum: float
    slot_budget_sum: float
    optimum: float
    d_max: int
    total_within_budget: bool
    slot_budget_within_bound: bool
    obsta_within_bound: bool

    @property
    def ok(self) -> bool:
        return self.total_within_budget and self.slot_budget_within_bound and self.obsta_within_bound


def check_bound(scenario: Scenario, *, horizon: str = "known", budget=None) -> BoundReport:
    from obsta.oracle import OracleBudget, offline_optimum

    opt = offline_optimum(scenario, budget or OracleBudget())
    run_ = run_obsta(scenario, horizon=horizon)
    if run_.violation is not None:
        raise InvariantViolation(run_.violation["slot"], run_.violation["message"])
    total = run_.cumulative("total")
    bsum = run_.cumulative("budget")
    ssum = run_.cumulative("slot_budget")
    # an always-empty group still pays for the source, so the factor is at least one
    factor = max(scenario.d_max, 1)
    return BoundReport(
        total,
        bsum,
        ssum,
        opt.cost,
        scenario.d_max,
        total <= bsum + EPS,
        ssum <= factor * opt.cost + EPS,
        total <= factor * opt.cost + EPS,
    )
