"""Weighted undirected graphs with deterministic Dijkstra.

Node identifiers are opaque strings ordered lexicographically. Shortest
path ties are broken by preferring the lexicographically smaller
predecessor, so every path query is reproducible bit for bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, TextIO

if TYPE_CHECKING:
    from obsta.tree import MulticastTree

Edge = tuple[str, str]


def edge_key(u: str, v: str) -> Edge:
    return (u, v) if u < v else (v, u)


class GraphError(ValueError):
    pass


class UnreachableError(GraphError):
    def __init__(self, source: str, target: str):
        super().__init__(f"node {target!r} is unreachable from {source!r}")
        self.source = source
        self.target = target


class Graph:
    """Immutable simple graph with positive, finite edge weights.

    Parallel edges given to the constructor collapse to the minimum weight.
    """

    __slots__ = ("_adj", "_nodes")

    def __init__(self, nodes: Iterable[str] = (), edges: Iterable[tuple[str, str, float]] = ()):
        adj: dict[str, dict[str, float]] = {n: {} for n in nodes}
        for u, v, w in edges:
            w = float(w)
            if u == v:
                raise GraphError(f"self-loop on {u!r}")
            if not (w > 0 and math.isfinite(w)):
                raise GraphError(f"edge {u!r}-{v!r} has non-positive or non-finite weight {w!r}")
            nu = adj.setdefault(u, {})
            nv = adj.setdefault(v, {})
            if v not in nu or w < nu[v]:
                nu[v] = w
                nv[u] = w
        self._adj = adj
        self._nodes = tuple(sorted(adj))

    @classmethod
    def _from_adjacency(cls, adj: dict[str, dict[str, float]]) -> Graph:
        # trusted internal constructor; caller guarantees symmetry and validity
        g = cls.__new__(cls)
        g._adj = adj
        g._nodes = tuple(sorted(adj))
        return g

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    def __contains__(self, node: object) -> bool:
        return node in self._adj

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._adj == other._adj

    def __repr__(self) -> str:
        return f"Graph({len(self._nodes)} nodes, {self.num_edges} edges)"

    def neighbors(self, u: str) -> Mapping[str, float]:
        return self._adj[u]

    def degree(self, u: str) -> int:
        return len(self._adj[u])

    def weight(self, u: str, v: str) -> float:
        return self._adj[u][v]

    def has_edge(self, u: str, v: str) -> bool:
        return u in self._adj and v in self._adj[u]

    @property
    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def edges(self) -> Iterator[tuple[str, str, float]]:
        """Yield ``(u, v, w)`` with ``u < v`` in sorted order."""
        for u in self._nodes:
            nbrs = self._adj[u]
            for v in sorted(nbrs):
                if u < v:
                    yield u, v, nbrs[v]

    def reachable(self, source: str) -> set[str]:
        seen = {source}
        stack = [source]
        while stack:
            u = stack.pop()
            for v in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen


def load_topology(stream: TextIO | Iterable[str]) -> Graph:
    """Parse an edge list: one ``u v w`` per line, ``#`` starts a comment.

    A line holding a single identifier declares an isolated node.
    """
    nodes: list[str] = []
    edges: list[tuple[str, str, float]] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            nodes.append(parts[0])
            continue
        if len(parts) != 3:
            raise GraphError(f"line {lineno}: expected 'u v w', got {raw.rstrip()!r}")
        u, v, ws = parts
        try:
            w = float(ws)
        except ValueError:
            raise GraphError(f"line {lineno}: weight {ws!r} is not a number") from None
        if u == v:
            raise GraphError(f"line {lineno}: self-loop on {u!r}")
        if not (w > 0 and math.isfinite(w)):
            raise GraphError(f"line {lineno}: non-positive weight {ws!r}")
        edges.append((u, v, w))
    return Graph(nodes, edges)


def dump_topology(g: Graph, stream: TextIO) -> None:
    for n in g.nodes:
        if not g.neighbors(n):
            stream.write(f"{n}\n")
    for u, v, w in g.edges():
        stream.write(f"{u} {v} {w!r}\n")


@dataclass(frozen=True)
class PathResult:
    nodes: tuple[str, ...]
    dist: float

    def edges(self) -> list[Edge]:
        return [edge_key(a, b) for a, b in zip(self.nodes, self.nodes[1:])]


@dataclass
class ShortestPaths:
    """Output of one Dijkstra run: settled distances and predecessor map."""

    sources: tuple[str, ...]
    dist: dict[str, float]
    pred: dict[str, str | None]

    def path(self, target: str) -> PathResult:
        if target not in self.dist:
            raise UnreachableError(self.sources[0] if self.sources else "?", target)
        out = [target]
        p = self.pred[target]
        while p is not None:
            out.append(p)
            p = self.pred[p]
        out.reverse()
        return PathResult(tuple(out), self.dist[target])


def dijkstra(
    g: Graph,
    sources: str | Iterable[str],
    targets: Iterable[str] | None = None,
    *,
    radius_of: str | None = None,
) -> ShortestPaths:
    """Multi-source Dijkstra with lexicographic predecessor tie-breaking.

    With ``targets`` the search stops once all of them are settled. With
    ``radius_of`` it stops after settling every node no farther than that
    node. Only settled nodes appear in the result.
    """
    if isinstance(sources, str):
        sources = (sources,)
    srcs = tuple(sources)
    adj = g._adj
    tent: dict[str, float] = {}
    pred: dict[str, str | None] = {}
    for s in srcs:
        if s not in adj:
            raise GraphError(f"unknown node {s!r}")
        tent[s] = 0.0
        pred[s] = None
    heap = [(0.0, s) for s in sorted(srcs)]
    heapq.heapify(heap)
    done: dict[str, float] = {}
    remaining = None if targets is None else set(targets)
    for t in remaining or ():
        if t not in adj:
            raise GraphError(f"unknown node {t!r}")
    if radius_of is not None and radius_of not in adj:
        raise GraphError(f"unknown node {radius_of!r}")
    bound = math.inf
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        if d > bound:
            break
        done[u] = d
        if u == radius_of:
            bound = d
        if remaining is not None:
            remaining.discard(u)
            if not remaining:
                break
        for v, w in adj[u].items():
            if v in done:
                continue
            nd = d + w
            old = tent.get(v)
            if old is None or nd < old:
                tent[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == old and u < pred[v]:  # type: ignore[operator]
                pred[v] = u
    return ShortestPaths(srcs, done, {n: pred[n] for n in done})


def shortest_path(g: Graph, s: str, t: str) -> PathResult:
    if s not in g:
        raise GraphError(f"unknown node {s!r}")
    if t not in g:
        raise GraphError(f"unknown node {t!r}")
    sp = dijkstra(g, s, targets=[t])
    if t not in sp.dist:
        raise UnreachableError(s, t)
    return sp.path(t)


@dataclass(frozen=True)
class GlobalSpt:
    """Shortest-path tree from the source to every candidate destination."""

    graph: Graph
    source: str
    tree: MulticastTree
    paths: Mapping[str, PathResult]
    dist: Mapping[str, float]
    path_edges: Mapping[str, frozenset[Edge]]

    @property
    def candidates(self) -> frozenset[str]:
        return self.tree.destinations


def global_spt(g: Graph, s: str, destinations: Iterable[str]) -> GlobalSpt:
    from obsta.tree import MulticastTree

    dests = sorted(set(destinations))
    sp = dijkstra(g, s)
    edges: dict[Edge, float] = {}
    paths: dict[str, PathResult] = {}
    pedges: dict[str, frozenset[Edge]] = {}
    for d in dests:
        if d not in sp.dist:
            raise UnreachableError(s, d)
        p = sp.path(d)
        paths[d] = p
        es = p.edges()
        pedges[d] = frozenset(es)
        for e in es:
            edges[e] = g._adj[e[0]][e[1]]
    tree = MulticastTree(s, edges, frozenset(dests))
    return GlobalSpt(g, s, tree, paths, dict(sp.dist), pedges)
