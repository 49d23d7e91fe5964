"""Exact answers for tiny instances: Steiner tree enumeration and the offline optimum."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from obsta.cost import CostKnobs, total_cost
from obsta.graph import Edge, Graph, edge_key
from obsta.scenario import Scenario
from obsta.tree import MulticastTree, branch_count, prune, sym_diff, tree_weight


class OracleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_nodes: int = 10
    max_slots: int = 4
    max_terminals: int = 4

    def __post_init__(self) -> None:
        if self.max_nodes > 10 or self.max_slots > 4 or self.max_terminals > 4:
            raise ValueError("oracle limits are capped at 10 nodes, 4 slots, 4 terminals")

    def check(self, n_nodes: int, n_slots: int = 1, n_terminals: int = 0) -> None:
        if n_nodes > self.max_nodes:
            raise OracleBudgetError(f"{n_nodes} nodes exceed the oracle limit of {self.max_nodes}")
        if n_slots > self.max_slots:
            raise OracleBudgetError(f"{n_slots} slots exceed the oracle limit of {self.max_slots}")
        if n_terminals > self.max_terminals:
            raise OracleBudgetError(f"{n_terminals} terminals exceed the oracle limit of {self.max_terminals}")


def _paths_to(g: Graph, start: str, targets: set[str]) -> Iterator[list[str]]:
    """Simple paths from ``start`` that end at the first node in ``targets``."""
    adj = g._adj
    path = [start]
    on_path = {start}

    def walk(u: str) -> Iterator[list[str]]:
        for v in sorted(adj[u]):
            if v in on_path:
                continue
            path.append(v)
            if v in targets:
                yield list(path)
            else:
                on_path.add(v)
                yield from walk(v)
                on_path.discard(v)
            path.pop()

    yield from walk(start)


def enumerate_steiner_trees(
    g: Graph,
    s: str,
    terminals: Iterable[str],
    budget: OracleBudget = OracleBudget(),
) -> Iterator[MulticastTree]:
    """Every inclusion-minimal subtree spanning ``s`` and ``terminals``, once each.

    Terminals are attached in sorted order, each along a simple path whose
    interior avoids the tree built so far. A minimal tree fixes every such
    path, so it is produced exactly once.
    """
    terms = sorted(set(terminals) - {s})
    budget.check(len(g), 1, len(terms))
    adj = g._adj
    for t in terms:
        if t not in adj:
            raise ValueError(f"unknown terminal {t!r}")

    def grow(k: int, nodes: frozenset[str], edges: dict[Edge, float]) -> Iterator[MulticastTree]:
        if k == len(terms):
            yield MulticastTree(s, dict(edges), frozenset(terms))
            return
        t = terms[k]
        if t in nodes:
            yield from grow(k + 1, nodes, edges)
            return
        for path in _paths_to(g, t, set(nodes)):
            added = {edge_key(a, b): adj[a][b] for a, b in zip(path, path[1:])}
            yield from grow(k + 1, nodes | frozenset(path), {**edges, **added})

    yield from grow(0, frozenset({s}), {})


def all_subtrees(g: Graph, s: str, terminals: Iterable[str], max_edges: int = 20) -> Iterator[MulticastTree]:
    """Every subtree containing ``s`` and ``terminals``, minimal or not.

    Brute force over edge subsets; only for cross-checking on tiny graphs.
    """
    terms = frozenset(terminals) - {s}
    all_edges = [(u, v) for u, v, _ in g.edges()]
    if len(all_edges) > max_edges:
        raise OracleBudgetError(f"{len(all_edges)} edges exceed the brute-force limit of {max_edges}")
    need = terms | {s}
    for r in range(len(all_edges) + 1):
        for combo in itertools.combinations(all_edges, r):
            tree = MulticastTree(s, {e: g.weight(*e) for e in combo}, terms)
            if not need <= tree.nodes:
                continue
            if len(tree.parent) != len(tree.adjacency) or len(combo) != len(tree.adjacency) - 1:
                continue
            yield tree


def minimal_by_brute_force(g: Graph, s: str, terminals: Iterable[str], max_edges: int = 20) -> list[MulticastTree]:
    """Subtrees whose every leaf is a terminal or the source."""
    out = []
    for t in all_subtrees(g, s, terminals, max_edges):
        if all(len(n) != 1 or v == s or v in t.destinations for v, n in t.adjacency.items()):
            out.append(t)
    return out


def steiner_minimum(g: Graph, s: str, terminals: Iterable[str], budget: OracleBudget = OracleBudget()) -> float:
    return min(tree_weight(t) for t in enumerate_steiner_trees(g, s, terminals, budget))


@dataclass(frozen=True)
class OfflineResult:
    cost: float
    trees: tuple[MulticastTree, ...]
    slot_costs: tuple[float, ...]


def offline_optimum(
    scenario: Scenario,
    budget: OracleBudget = OracleBudget(),
    *,
    minimal_only: bool = True,
    knobs: CostKnobs | None = None,
) -> OfflineResult:
    """Cheapest tree sequence with full knowledge of every slot's membership.

    Dynamic program over slots; the state is the deployed tree. With
    ``minimal_only=False`` every subtree is a state (slow, for checking the
    minimality pruning).
    """
    knobs = knobs or scenario.knobs
    members = scenario.memberships()
    budget.check(len(scenario.graph), len(members), max((len(m) for m in members), default=0))
    g, s = scenario.graph, scenario.source
    empty = MulticastTree.single(s)
    # layer: list of (cost so far, tree, back index)
    layers: list[list[tuple[float, MulticastTree, int]]] = []
    prev_layer = [(0.0, empty, -1)]
    prev_dests: frozenset[str] = frozenset()
    for dests in members:
        if minimal_only:
            trees = list(enumerate_steiner_trees(g, s, dests, budget))
        else:
            trees = list(all_subtrees(g, s, dests))
        # rerouting only sees the stayers' part of each tree
        stay_prev: dict[frozenset[Edge], tuple[float, int]] = {}
        for k, (c, t, _) in enumerate(prev_layer):
            key = frozenset(prune(t, prev_dests - dests).edges)
            if key not in stay_prev or c < stay_prev[key][0]:
                stay_prev[key] = (c, k)
        prev_maps = [({e: g.weight(*e) for e in key}, c, k) for key, (c, k) in stay_prev.items()]
        layer = []
        for t in trees:
            base = total_cost(tree_weight(t), branch_count(t), 0.0, knobs)
            mine = prune(t, dests - prev_dests).edges
            best_c, best_k = math.inf, -1
            for old, c, k in prev_maps:
                rc = sym_diff(old, mine).weight
                cand = c + base + knobs.beta * rc
                if cand < best_c or (cand == best_c and k < best_k):
                    best_c, best_k = cand, k
            layer.append((best_c, t, best_k))
        layers.append(layer)
        prev_layer, prev_dests = layer, dests
    if not layers:
        return OfflineResult(0.0, (), ())
    k = min(range(len(prev_layer)), key=lambda j: (prev_layer[j][0], j))
    cost = prev_layer[k][0]
    seq = []
    for layer in reversed(layers):
        c, t, back = layer[k]
        seq.append((c, t))
        k = back
    seq.reverse()
    trees = tuple(t for _, t in seq)
    cum = [c for c, _ in seq]
    slot_costs = tuple(b - a for a, b in zip([0.0] + cum[:-1], cum))
    return OfflineResult(cost, trees, slot_costs)
