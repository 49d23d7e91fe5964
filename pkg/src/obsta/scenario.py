"""Scenarios: membership traces over a topology, their file format and generators.

On disk a scenario is three files: a JSON header, an edge-list topology
referenced from the header, and a JSONL trace with one record per slot::

    {"slot": 1, "join": ["d1"], "leave": []}
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from obsta.cost import CostKnobs
from obsta.engine import EngineOptions
from obsta.graph import Graph, dump_topology, load_topology

HEADER_KEYS = (
    "topology",
    "source",
    "candidates",
    "alpha",
    "beta",
    "gamma",
    "stability_threshold",
    "seed",
    "selection_prc_sign",
    "selection_prc_beta",
    "stable_sort",
)


class ScenarioError(ValueError):
    def __init__(self, message: str, slot: int | None = None):
        super().__init__(message if slot is None else f"slot {slot}: {message}")
        self.slot = slot


@dataclass(frozen=True)
class SlotEvents:
    index: int
    joins: tuple[str, ...] = ()
    leaves: tuple[str, ...] = ()


@dataclass
class Scenario:
    graph: Graph
    source: str
    candidates: frozenset[str]
    slots: list[SlotEvents] = field(default_factory=list)
    knobs: CostKnobs = CostKnobs()
    options: EngineOptions = EngineOptions()
    seed: int = 0

    def __post_init__(self) -> None:
        self.candidates = frozenset(self.candidates)
        self.validate()

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def validate(self) -> None:
        if self.source not in self.graph:
            raise ScenarioError(f"source {self.source!r} is not in the topology")
        unknown = sorted(d for d in self.candidates if d not in self.graph)
        if unknown:
            raise ScenarioError(f"unknown candidate nodes {unknown}")
        if self.source in self.candidates:
            raise ScenarioError("the source cannot be a candidate destination")
        members: set[str] = set()
        for k, ev in enumerate(self.slots, start=1):
            i = ev.index
            if i != k:
                raise ScenarioError(f"expected slot index {k}, got {i}", i)
            for d in ev.joins + ev.leaves:
                if d not in self.candidates:
                    raise ScenarioError(f"unknown node {d!r}", i)
            if len(set(ev.joins)) != len(ev.joins) or len(set(ev.leaves)) != len(ev.leaves):
                raise ScenarioError("duplicate node in one event list", i)
            for d in ev.leaves:
                if d not in members:
                    raise ScenarioError(f"leave of absent node {d!r}", i)
            for d in ev.joins:
                if d in members:
                    raise ScenarioError(f"join of present node {d!r}", i)
            members.difference_update(ev.leaves)
            members.update(ev.joins)

    def memberships(self) -> list[frozenset[str]]:
        out, cur = [], frozenset()
        for ev in self.slots:
            cur = (cur - frozenset(ev.leaves)) | frozenset(ev.joins)
            out.append(cur)
        return out

    @property
    def d_max(self) -> int:
        return max((len(m) for m in self.memberships()), default=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.source == other.source
            and self.candidates == other.candidates
            and self.slots == other.slots
            and self.knobs == other.knobs
            and self.options == other.options
            and self.seed == other.seed
        )


def parse_trace(lines: Iterable[str]) -> Iterator[SlotEvents]:
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"trace line {lineno}: {e}") from None
        if not isinstance(rec, dict) or "slot" not in rec:
            raise ScenarioError(f"trace line {lineno}: record must be an object with a 'slot' field")
        i = rec["slot"]
        if not isinstance(i, int) or isinstance(i, bool):
            raise ScenarioError(f"trace line {lineno}: slot must be an integer")
        joins, leaves = rec.get("join", []), rec.get("leave", [])
        if not all(isinstance(x, str) for x in joins) or not all(isinstance(x, str) for x in leaves):
            raise ScenarioError("join/leave entries must be node names", i)
        yield SlotEvents(i, tuple(joins), tuple(leaves))


def parse_scenario(header: dict, trace: Iterable[str], base_dir: str = ".") -> Scenario:
    missing = [k for k in ("topology", "source", "candidates") if k not in header]
    if missing:
        raise ScenarioError(f"header is missing keys {missing}")
    unknown = sorted(set(header) - set(HEADER_KEYS))
    if unknown:
        raise ScenarioError(f"header has unknown keys {unknown}")
    path = os.path.join(base_dir, header["topology"])
    with open(path) as fh:
        graph = load_topology(fh)
    defaults = CostKnobs()
    knobs = CostKnobs(
        alpha=float(header.get("alpha", defaults.alpha)),
        beta=float(header.get("beta", defaults.beta)),
        gamma=float(header.get("gamma", defaults.gamma)),
        stability_threshold=float(header.get("stability_threshold", defaults.stability_threshold)),
    )
    opts = EngineOptions(
        selection_prc_sign=int(header.get("selection_prc_sign", 1)),
        selection_prc_beta=bool(header.get("selection_prc_beta", False)),
        stable_sort=header.get("stable_sort", "si"),
    )
    return Scenario(
        graph,
        header["source"],
        frozenset(header["candidates"]),
        list(parse_trace(trace)),
        knobs,
        opts,
        int(header.get("seed", 0)),
    )


def load_scenario(header_path: str) -> Scenario:
    with open(header_path) as fh:
        try:
            header = json.load(fh)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{header_path}: {e}") from None
    trace_path = _trace_path(header_path)
    base = os.path.dirname(os.path.abspath(header_path))
    if not os.path.exists(trace_path):
        return parse_scenario(header, [], base)
    with open(trace_path) as fh:
        return parse_scenario(header, fh, base)


def _trace_path(header_path: str) -> str:
    root = header_path[:-5] if header_path.endswith(".json") else header_path
    return root + ".trace.jsonl"


def header_of(sc: Scenario, topology: str) -> dict:
    return {
        "topology": topology,
        "source": sc.source,
        "candidates": sorted(sc.candidates),
        "alpha": sc.knobs.alpha,
        "beta": sc.knobs.beta,
        "gamma": sc.knobs.gamma,
        "stability_threshold": sc.knobs.stability_threshold,
        "seed": sc.seed,
        "selection_prc_sign": sc.options.selection_prc_sign,
        "selection_prc_beta": sc.options.selection_prc_beta,
        "stable_sort": sc.options.stable_sort,
    }


def write_trace(sc: Scenario, stream: TextIO) -> None:
    for ev in sc.slots:
        stream.write(json.dumps({"slot": ev.index, "join": list(ev.joins), "leave": list(ev.leaves)}) + "\n")


def save_scenario(sc: Scenario, directory: str, name: str = "scenario") -> str:
    """Write ``name.json``, ``name.topo`` and ``name.trace.jsonl``; return the header path."""
    os.makedirs(directory, exist_ok=True)
    topo = name + ".topo"
    with open(os.path.join(directory, topo), "w") as fh:
        dump_topology(sc.graph, fh)
    header_path = os.path.join(directory, name + ".json")
    with open(header_path, "w") as fh:
        json.dump(header_of(sc, topo), fh, indent=2)
        fh.write("\n")
    with open(_trace_path(header_path), "w") as fh:
        write_trace(sc, fh)
    return header_path


def toy_example() -> Scenario:
    """Six-node example with two destinations joining one after the other."""
    edges = [
        ("s", "a", 7.5),
        ("a", "d1", 2.5),
        ("s", "b", 6.2),
        ("b", "d2", 4.0),
        ("b", "d1", 4.0),
        ("a", "c", 2.0),
        ("c", "d2", 4.0),
        ("d1", "d2", 6.0),
    ]
    return Scenario(
        Graph(edges=edges),
        "s",
        frozenset({"d1", "d2"}),
        [SlotEvents(1, ("d1",)), SlotEvents(2, ("d2",))],
        CostKnobs(alpha=1.0, beta=0.2),
    )


@dataclass(frozen=True)
class RandomParams:
    """Knobs of the synthetic generator.

    Sampling, all from ``numpy.random.default_rng(seed)`` in this order:

    1. ``perm = rng.permutation(nodes)``; for ``k = 1..nodes-1`` connect
       ``perm[k]`` to ``perm[rng.integers(k)]`` (a random spanning tree).
    2. ``u = rng.random(nodes*(nodes-1)//2)`` over index pairs ``i < j`` in
       row-major order; add ``(i, j)`` when ``u < edge_density``.
    3. ``rng.uniform(1, 10, n_edges)`` assigns weights to the edges sorted
       by index pair.
    4. ``rng.choice(nodes - 1, group_size, replace=False) + 1`` picks the
       candidates (node 0 is the source).
    5. Slot 1: ``u = rng.random(group_size)`` over sorted candidates, join
       where ``u < initial_join``. Each later slot draws one ``u`` per sorted
       candidate: an absent one joins if ``u < churn*bias_join``, a present
       one leaves if ``u < churn*bias_leave``.
    """

    nodes: int = 60
    edge_density: float = 0.05
    group_size: int = 20
    churn: float = 0.3
    n_slots: int = 50
    initial_join: float = 0.3
    bias_join: float = 0.2
    bias_leave: float = 0.05

    def __post_init__(self) -> None:
        if self.nodes < 2:
            raise ValueError("need at least two nodes")
        if not 0 <= self.edge_density <= 1:
            raise ValueError("edge_density must lie in [0, 1]")
        if not 1 <= self.group_size <= self.nodes - 1:
            raise ValueError("group_size must lie in [1, nodes-1]")
        if not 0 <= self.churn <= 1:
            raise ValueError("churn must lie in [0, 1]")
        if self.n_slots < 0:
            raise ValueError("n_slots must be non-negative")
        if not self.bias_join > self.bias_leave:
            raise ValueError("joins must be more likely than leaves")


def node_names(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"v{i:0{width}d}" for i in range(n)]


def generate_random_scenario(
    params: RandomParams,
    seed: int = 0,
    knobs: CostKnobs = CostKnobs(),
    options: EngineOptions = EngineOptions(),
) -> Scenario:
    rng = np.random.default_rng(seed)
    n = params.nodes
    names = node_names(n)
    pairs: set[tuple[int, int]] = set()
    perm = rng.permutation(n)
    for k in range(1, n):
        a, b = int(perm[k]), int(perm[rng.integers(k)])
        pairs.add((min(a, b), max(a, b)))
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < params.edge_density
    pairs.update(zip(iu[hit].tolist(), ju[hit].tolist()))
    ordered = sorted(pairs)
    weights = rng.uniform(1.0, 10.0, len(ordered))
    graph = Graph(names, [(names[i], names[j], float(w)) for (i, j), w in zip(ordered, weights)])

    picks = rng.choice(n - 1, params.group_size, replace=False) + 1
    cands = sorted(names[int(k)] for k in picks)
    slots = []
    present: set[str] = set()
    p_join = params.churn * params.bias_join
    p_leave = params.churn * params.bias_leave
    for i in range(1, params.n_slots + 1):
        u = rng.random(len(cands))
        if i == 1:
            joins = [d for d, x in zip(cands, u) if x < params.initial_join]
            leaves = []
        else:
            joins = [d for d, x in zip(cands, u) if d not in present and x < p_join]
            leaves = [d for d, x in zip(cands, u) if d in present and x < p_leave]
        present.difference_update(leaves)
        present.update(joins)
        slots.append(SlotEvents(i, tuple(joins), tuple(leaves)))
    return Scenario(graph, names[0], frozenset(cands), slots, knobs, options, seed)


@dataclass(frozen=True)
class HardnessParams:
    base_graph: Graph
    start: str
    clone_exponent: int = 1
    order: Sequence[str] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.start not in self.base_graph:
            raise ValueError(f"start node {self.start!r} is not in the base graph")
        if self.clone_exponent < 1:
            raise ValueError("clone_exponent must be >= 1")
        if self.order is not None and sorted(self.order) != list(self.base_graph.nodes):
            raise ValueError("order must be a permutation of the base graph's nodes")

    @property
    def m(self) -> int:
        return len(self.base_graph)

    def permutation(self) -> list[str]:
        if self.order is not None:
            return list(self.order)
        rng = np.random.default_rng(self.seed)
        nodes = list(self.base_graph.nodes)
        return [nodes[int(k)] for k in rng.permutation(len(nodes))]


def clone_name(v: str, j: int) -> str:
    return f"{v}@{j}"


def generate_hardness_instance(params: HardnessParams) -> Scenario:
    """Adversarial instance: ``m**p`` unit-weight clones of the base graph,
    each hung off the source at its start node. Clone nodes join one per
    slot, cycling through the permutation within copy ``ceil(i/m)``, then
    leave in reverse order."""
    m, p = params.m, params.clone_exponent
    copies = m**p
    total = m ** (p + 1)
    src = "s"  # every other node name carries an "@"
    edges = []
    for j in range(1, copies + 1):
        edges.append((src, clone_name(params.start, j), 1.0))
        for u, v, _ in params.base_graph.edges():
            edges.append((clone_name(u, j), clone_name(v, j), 1.0))
    nodes = [clone_name(v, j) for j in range(1, copies + 1) for v in params.base_graph.nodes]
    graph = Graph([src] + nodes, edges)
    perm = params.permutation()
    order = [clone_name(perm[(i - 1) % m], math.ceil(i / m)) for i in range(1, total + 1)]
    slots = [SlotEvents(i, (d,)) for i, d in enumerate(order, start=1)]
    slots += [SlotEvents(total + k, (), (d,)) for k, d in enumerate(reversed(order), start=1)]
    knobs = CostKnobs(alpha=copies * (total + 1) / 2, beta=0.0)
    return Scenario(graph, src, frozenset(nodes), slots, knobs, EngineOptions(), params.seed)


def path_graph(m: int) -> Graph:
    names = [f"h{i}" for i in range(m)]
    return Graph(names, [(names[i], names[i + 1], 1.0) for i in range(m - 1)])
