"""Rooted multicast trees and the surgery operators used to reshape them."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from obsta.graph import Edge, Graph, GraphError, edge_key


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class MulticastTree:
    """Undirected edge set plus a root; orientation is derived on demand.

    ``edges`` maps normalized ``(u, v)`` pairs (``u < v``) to weights and
    must not be mutated after construction.
    """

    root: str
    edges: Mapping[Edge, float] = field(default_factory=dict)
    destinations: frozenset[str] = frozenset()

    @classmethod
    def single(cls, root: str) -> MulticastTree:
        return cls(root, {}, frozenset())

    @cached_property
    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {self.root: []}
        for u, v in self.edges:
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
        return adj

    @cached_property
    def nodes(self) -> frozenset[str]:
        return frozenset(self.adjacency)

    @cached_property
    def parent(self) -> dict[str, str | None]:
        adj = self.adjacency
        par: dict[str, str | None] = {self.root: None}
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in par:
                    par[v] = u
                    queue.append(v)
        return par

    @cached_property
    def depth(self) -> dict[str, float]:
        """Weighted distance from the root along the tree."""
        par = self.parent
        out: dict[str, float] = {self.root: 0.0}
        # BFS order guarantees the parent is filled first
        for v, p in par.items():
            if p is not None:
                out[v] = out[p] + self.edges[edge_key(v, p)]
        return out

    @property
    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    def degree(self, v: str) -> int:
        return len(self.adjacency.get(v, ()))

    def path_nodes(self, v: str) -> list[str]:
        """Nodes on the tree path from the root to ``v``, root first."""
        par = self.parent
        if v not in par:
            raise TreeError(f"{v!r} is not in the tree")
        out = [v]
        p = par[v]
        while p is not None:
            out.append(p)
            p = par[p]
        out.reverse()
        return out

    def path_edges(self, v: str) -> list[Edge]:
        ns = self.path_nodes(v)
        return [edge_key(a, b) for a, b in zip(ns, ns[1:])]

    def with_destinations(self, dests: Iterable[str]) -> MulticastTree:
        return MulticastTree(self.root, self.edges, frozenset(dests))

    def validate(self) -> None:
        """Raise :class:`TreeError` unless this is a well-formed multicast tree."""
        if len(self.parent) != len(self.adjacency):
            raise TreeError("tree is disconnected from its root")
        if len(self.edges) != len(self.adjacency) - 1:
            raise TreeError("edge set contains a cycle")
        missing = self.destinations - self.nodes
        if missing:
            raise TreeError(f"destinations not in tree: {sorted(missing)}")
        for v, nbrs in self.adjacency.items():
            if len(nbrs) == 1 and v != self.root and v not in self.destinations:
                raise TreeError(f"leaf {v!r} is neither a destination nor the root")

    def is_valid(self) -> bool:
        try:
            self.validate()
        except TreeError:
            return False
        return True


@dataclass(frozen=True)
class EdgeSet:
    edges: Mapping[Edge, float]
    weight: float


def _paths_union(tree: MulticastTree, targets: Iterable[str]) -> dict[Edge, float]:
    par = tree.parent
    tw = tree.edges
    out: dict[Edge, float] = {}
    seen = {tree.root}
    for d in sorted(targets):
        v = d
        while v not in seen:
            seen.add(v)
            p = par[v]
            e = edge_key(v, p)  # type: ignore[arg-type]
            out[e] = tw[e]
            v = p  # type: ignore[assignment]
    return out


def prune(tree: MulticastTree, leaving: Iterable[str]) -> MulticastTree:
    """Remove ``leaving`` destinations and every edge only they needed."""
    leaving = frozenset(leaving)
    extra = leaving - tree.destinations
    if extra:
        raise TreeError(f"cannot prune non-destinations {sorted(extra)}")
    keep = tree.destinations - leaving
    return MulticastTree(tree.root, _paths_union(tree, keep), keep)


def _edges_of(x: MulticastTree | Mapping[Edge, float]) -> Mapping[Edge, float]:
    return x.edges if isinstance(x, MulticastTree) else x


def sym_diff(a: MulticastTree | Mapping[Edge, float], b: MulticastTree | Mapping[Edge, float]) -> EdgeSet:
    ea, eb = _edges_of(a), _edges_of(b)
    out = {e: w for e, w in ea.items() if e not in eb}
    out.update((e, w) for e, w in eb.items() if e not in ea)
    return EdgeSet(out, math.fsum(out.values()))


def sprout(tree: MulticastTree, seq: Sequence[str]) -> list[MulticastTree]:
    """Nested subtrees ``A_l``, each the union of root paths to ``seq[:l]``."""
    par = tree.parent
    for a in seq:
        if a not in par:
            raise TreeError(f"sprout node {a!r} is not in the tree")
    out: list[MulticastTree] = []
    edges: dict[Edge, float] = {}
    seen = {tree.root}
    dests: set[str] = set()
    for a in seq:
        v = a
        while v not in seen:
            seen.add(v)
            p = par[v]
            e = edge_key(v, p)  # type: ignore[arg-type]
            edges[e] = tree.edges[e]
            v = p  # type: ignore[assignment]
        if a in tree.destinations:
            dests.add(a)
        out.append(MulticastTree(tree.root, dict(edges), frozenset(dests)))
    return out


def graft_path(base_nodes: frozenset[str] | set[str], donor: MulticastTree, d: str) -> list[str]:
    """Donor-tree path from ``d`` up to its first node inside ``base_nodes``.

    Returned bottom-up: ``[d, ..., u_d]``. A single element means ``d`` is
    already in the base.
    """
    par = donor.parent
    path = [d]
    v = d
    while v not in base_nodes:
        v = par[v]  # type: ignore[assignment]
        if v is None:
            raise TreeError(f"walk from {d!r} never reached the base tree")
        path.append(v)
    return path


def graft(a: MulticastTree, b: MulticastTree) -> MulticastTree:
    """Attach every destination of ``b`` to ``a`` along ``b`` until first contact."""
    if a.root != b.root:
        raise TreeError(f"roots differ: {a.root!r} vs {b.root!r}")
    base = a.nodes
    edges = dict(a.edges)
    for d in sorted(b.destinations):
        path = graft_path(base, b, d)
        for x, y in zip(path, path[1:]):
            e = edge_key(x, y)
            edges[e] = b.edges[e]
    return MulticastTree(a.root, edges, a.destinations | b.destinations)


def contraction_boundary(g: Graph, nodes: Iterable[str]) -> dict[str, tuple[str, float]]:
    """For each outside neighbour ``v`` of ``nodes``: the inside endpoint and
    weight of the cheapest edge to ``v`` (ties to the smaller inside node)."""
    inside = set(nodes)
    best: dict[str, tuple[str, float]] = {}
    adj = g._adj
    for t in sorted(inside):
        for v, w in adj[t].items():
            if v in inside:
                continue
            cur = best.get(v)
            if cur is None or w < cur[1]:
                best[v] = (t, w)
    return best


def fresh_node_id(g: Graph, base: str) -> str:
    name = base + "'"
    while name in g:
        name += "'"
    return name


def contract_nodes(g: Graph, nodes: Iterable[str], name: str | None = None) -> tuple[Graph, str, dict[str, tuple[str, float]]]:
    """Merge ``nodes`` into one supernode keeping the min-weight edge per neighbour.

    Also returns the boundary map used to expand supernode edges back into
    original edges. Connectivity of ``nodes`` is the caller's concern.
    """
    inside = set(nodes)
    if not inside:
        raise TreeError("cannot contract an empty node set")
    for n in inside:
        if n not in g:
            raise GraphError(f"unknown node {n!r}")
    sup = name if name is not None else fresh_node_id(g, min(inside))
    boundary = contraction_boundary(g, inside)
    adj = dict(g._adj)
    for n in inside:
        del adj[n]
    for v, (_, w) in boundary.items():
        nbrs = {x: wx for x, wx in adj[v].items() if x not in inside}
        nbrs[sup] = w
        adj[v] = nbrs
    adj[sup] = {v: w for v, (_, w) in boundary.items()}
    return Graph._from_adjacency(adj), sup, boundary


def contract(g: Graph, tree: MulticastTree) -> tuple[Graph, str]:
    if len(tree.parent) != len(tree.adjacency):
        raise TreeError("cannot contract a disconnected subgraph")
    for u, v in tree.edges:
        if not g.has_edge(u, v):
            raise TreeError(f"tree edge {u!r}-{v!r} is not in the graph")
    cg, sup, _ = contract_nodes(g, tree.nodes, fresh_node_id(g, tree.root))
    return cg, sup


def branch_count(tree: MulticastTree) -> int:
    """Root plus every other node of tree degree three or more."""
    root = tree.root
    return 1 + sum(1 for v, nbrs in tree.adjacency.items() if v != root and len(nbrs) >= 3)


def tree_weight(tree: MulticastTree) -> float:
    return math.fsum(tree.edges.values())
