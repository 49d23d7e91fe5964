"""Per-slot baseline trees: pruned global shortest-path tree and a Steiner heuristic."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass
from typing import Iterable

from obsta.cost import CostKnobs, SlotLedger, draft_ledger
from obsta.graph import Edge, GlobalSpt, Graph, UnreachableError, edge_key
from obsta.tree import MulticastTree, prune


class BaselineKind(enum.Enum):
    SPT = "spt"
    ST = "st"


def spt_tree(gspt: GlobalSpt, dests: Iterable[str]) -> MulticastTree:
    dests = frozenset(dests)
    extra = dests - gspt.candidates
    if extra:
        raise ValueError(f"not candidate destinations: {sorted(extra)}")
    return prune(gspt.tree, gspt.candidates - dests)


def _tm_tree(g: Graph, s: str, terminals: frozenset[str]) -> dict[Edge, float]:
    """Nearest-terminal-first growth: repeatedly add the shortest path from
    the current tree to the closest unattached terminal."""
    adj = g._adj
    in_tree = {s}
    edges: dict[Edge, float] = {}
    left = set(terminals) - in_tree
    # one multi-source search per attachment, restarted from the grown tree
    while left:
        dist: dict[str, float] = {v: 0.0 for v in in_tree}
        pred: dict[str, str | None] = {v: None for v in in_tree}
        heap = [(0.0, v) for v in sorted(in_tree)]
        heapq.heapify(heap)
        done = set()
        hit = None
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u in left:
                hit = u
                break
            for v, w in adj[u].items():
                if v in done:
                    continue
                nd = d + w
                old = dist.get(v)
                if old is None or nd < old:
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
                elif nd == old and u < pred[v]:  # type: ignore[operator]
                    pred[v] = u
        if hit is None:
            raise UnreachableError(s, min(left))
        v = hit
        while pred[v] is not None:
            p = pred[v]
            edges[edge_key(v, p)] = adj[v][p]  # type: ignore[index]
            in_tree.add(v)
            v = p  # type: ignore[assignment]
        in_tree.add(hit)
        left.discard(hit)
    return edges


def _mst_prune(g: Graph, nodes: set[str], keep: frozenset[str]) -> dict[Edge, float]:
    """MST of the subgraph induced by ``nodes`` with non-``keep`` leaves stripped."""
    adj = g._adj
    cand = sorted((adj[u][v], u, v) for u in nodes for v in adj[u] if v in nodes and u < v)
    parent = {v: v for v in nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    out: dict[Edge, float] = {}
    for w, u, v in cand:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            out[(u, v)] = w
    nbrs: dict[str, set[str]] = {v: set() for v in nodes}
    for u, v in out:
        nbrs[u].add(v)
        nbrs[v].add(u)
    stack = [v for v in nodes if len(nbrs[v]) == 1 and v not in keep]
    while stack:
        v = stack.pop()
        if len(nbrs[v]) != 1:
            continue
        (u,) = nbrs[v]
        nbrs[v].clear()
        nbrs[u].discard(v)
        del out[edge_key(u, v)]
        if len(nbrs[u]) == 1 and u not in keep:
            stack.append(u)
    return out


def _nodes_of(edges: dict[Edge, float], s: str) -> set[str]:
    out = {s}
    for u, v in edges:
        out.add(u)
        out.add(v)
    return out


def steiner_heuristic(g: Graph, s: str, dests: Iterable[str], *, improve: bool = True) -> MulticastTree:
    """Takahashi-Matsuyama tree, optionally followed by MST re-spanning and
    Steiner-vertex insertion until no single insertion lowers the weight."""
    terminals = frozenset(dests)
    keep = terminals | {s}
    edges = _tm_tree(g, s, terminals)
    if improve and edges:
        edges = _mst_prune(g, _nodes_of(edges, s), keep)
        best = sum(edges.values())
        improved = True
        while improved:
            improved = False
            nodes = _nodes_of(edges, s)
            for v in g.nodes:
                if v in nodes:
                    continue
                if sum(1 for x in g._adj[v] if x in nodes) < 2:
                    continue
                trial = _mst_prune(g, nodes | {v}, keep)
                w = sum(trial.values())
                if w < best - 1e-12:
                    edges, best, improved = trial, w, True
                    nodes = _nodes_of(edges, s)
    return MulticastTree(s, edges, terminals - {s})


@dataclass
class BaselineRun:
    """Replays a membership trace with a baseline, using the shared ledger."""

    kind: BaselineKind
    spt: GlobalSpt
    knobs: CostKnobs
    tree: MulticastTree | None = None
    deposit: float = 0.0
    slot: int = 0

    def __post_init__(self) -> None:
        if self.tree is None:
            self.tree = MulticastTree.single(self.spt.source)

    def build(self, dests: frozenset[str]) -> MulticastTree:
        if self.kind is BaselineKind.SPT:
            return spt_tree(self.spt, dests)
        return steiner_heuristic(self.spt.graph, self.spt.source, dests)

    def step(self, dests: Iterable[str]) -> SlotLedger:
        dests = frozenset(dests)
        self.slot += 1
        prev = self.tree
        assert prev is not None
        tree = self.build(dests)
        led = draft_ledger(
            tree,
            slot=self.slot,
            prev_tree=prev,
            prev_dests=prev.destinations,
            prev_deposit=self.deposit,
            spt=self.spt,
            knobs=self.knobs,
        )
        self.tree, self.deposit = tree, led.deposit
        return led
