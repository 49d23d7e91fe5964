"""Scalar accounting: tree, branch, rerouting and total costs, budget and deposit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from obsta.graph import Edge, Graph, GlobalSpt, UnreachableError, dijkstra
from obsta.tree import MulticastTree, branch_count, prune, sym_diff, tree_weight

EPS = 1e-9


@dataclass(frozen=True)
class CostKnobs:
    alpha: float = 1.0
    beta: float = 0.2
    gamma: float = 0.5
    stability_threshold: float = 0.2

    def __post_init__(self) -> None:
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0 <= self.stability_threshold <= 1:
            raise ValueError(f"stability threshold must lie in [0, 1], got {self.stability_threshold}")


@dataclass(frozen=True)
class SlotLedger:
    """Cost breakdown of one tree in one slot.

    ``budget`` is the per-destination incremental form that drives the
    deposit; ``slot_budget`` is the distance-sum-plus-alpha-per-member form
    used for the competitive bound.
    """

    slot: int
    tree_cost: float
    branch_cost: int
    rerouting_cost: float
    budget: float
    slot_budget: float
    deposit: float
    potential_rc: float
    total: float


def tree_cost(tree: MulticastTree) -> float:
    return tree_weight(tree)


def total_cost(w: float, b: int, rc: float, knobs: CostKnobs) -> float:
    return w + knobs.alpha * b + knobs.beta * rc


def rerouting_cost(
    prev: MulticastTree,
    cur: MulticastTree,
    prev_dests: Iterable[str],
    cur_dests: Iterable[str],
) -> float:
    """Weight of the change in routing for destinations present in both slots."""
    dp, dc = frozenset(prev_dests), frozenset(cur_dests)
    old = prune(prev, dp - dc) if prev.destinations == dp else prune(prev.with_destinations(dp), dp - dc)
    new = prune(cur, dc - dp) if cur.destinations == dc else prune(cur.with_destinations(dc), dc - dp)
    return sym_diff(old, new).weight


def _distances(g: Graph, s: str, dests: Iterable[str], spt: GlobalSpt | None) -> dict[str, float]:
    dests = list(dests)
    if spt is not None and all(d in spt.dist for d in dests):
        return {d: spt.dist[d] for d in dests}
    sp = dijkstra(g, s)
    for d in dests:
        if d not in sp.dist:
            raise UnreachableError(s, d)
    return {d: sp.dist[d] for d in dests}


def budget(
    dests: Iterable[str],
    g: Graph,
    s: str,
    knobs: CostKnobs,
    *,
    spt: GlobalSpt | None = None,
) -> float:
    """Candidate budget: one branch allowance for the source plus, per
    destination, its shortest distance and one more branch allowance."""
    dist = _distances(g, s, dests, spt)
    a = knobs.alpha
    return a + math.fsum(dist[d] + a for d in dist)


def slot_budget(
    dests: Iterable[str],
    g: Graph,
    s: str,
    knobs: CostKnobs,
    *,
    spt: GlobalSpt | None = None,
) -> float:
    """Sum of shortest distances plus alpha per member."""
    dist = _distances(g, s, dests, spt)
    return math.fsum(dist.values()) + knobs.alpha * len(dist)


def potential_rerouting_cost(
    tree: MulticastTree,
    dests: Iterable[str],
    g: Graph,
    s: str,
    *,
    spt: GlobalSpt | None = None,
) -> float:
    """Weight of the union over ``dests`` of (tree path xor shortest path)."""
    dests = sorted(dests)
    if not dests:
        return 0.0
    if spt is not None and all(d in spt.path_edges for d in dests):
        shortest: Mapping[str, frozenset[Edge]] = spt.path_edges
    else:
        sp = dijkstra(g, s)
        shortest = {}
        for d in dests:
            if d not in sp.dist:
                raise UnreachableError(s, d)
            shortest[d] = frozenset(sp.path(d).edges())  # type: ignore[index]
    union: dict[Edge, float] = {}
    adj = g._adj
    for d in dests:
        mine = set(tree.path_edges(d))
        ref = shortest[d]
        for e in mine.symmetric_difference(ref):
            union[e] = adj[e[0]][e[1]]
    return math.fsum(union.values())


def sufficient_deposit(dep: float, prc: float, knobs: CostKnobs) -> bool:
    return dep >= knobs.beta * prc - EPS


def make_ledger(
    slot: int,
    w: float,
    b: int,
    rc: float,
    budget_value: float,
    slot_budget_value: float,
    prev_deposit: float,
    prc: float,
    knobs: CostKnobs,
) -> SlotLedger:
    total = total_cost(w, b, rc, knobs)
    dep = prev_deposit + budget_value - total
    return SlotLedger(slot, w, b, rc, budget_value, slot_budget_value, dep, prc, total)


def draft_ledger(
    tree: MulticastTree,
    *,
    slot: int,
    prev_tree: MulticastTree,
    prev_dests: Iterable[str],
    prev_deposit: float,
    spt: GlobalSpt,
    knobs: CostKnobs,
) -> SlotLedger:
    """Ledger of ``tree`` computed from scratch against the previous slot.

    A partial tree is charged only for what it serves: rerouting counts the
    stayers it already carries and the budget covers its own destinations.
    """
    dests = tree.destinations
    g, s = spt.graph, spt.source
    return make_ledger(
        slot,
        tree_cost(tree),
        branch_count(tree),
        rerouting_cost(prev_tree, tree, prev_dests, dests),
        budget(dests, g, s, knobs, spt=spt),
        slot_budget(dests, g, s, knobs, spt=spt),
        prev_deposit,
        potential_rerouting_cost(tree, dests, g, s, spt=spt),
        knobs,
    )
