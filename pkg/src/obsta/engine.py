"""Online branch-aware Steiner tree algorithm (OBSTA).

Each slot runs four phases: reference tree construction from stable
destinations, candidate generation by sprouting the previous tree,
candidate patching under the deposit constraint, and final selection.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from obsta.cost import (
    CostKnobs,
    SlotLedger,
    draft_ledger,
    make_ledger,
    sufficient_deposit,
    EPS,
)
from obsta.graph import Edge, GlobalSpt, Graph, ShortestPaths, UnreachableError, edge_key
from obsta.tree import (
    MulticastTree,
    fresh_node_id,
    graft,
    graft_path,
    prune,
    sprout,
)

STABLE_SORTS = ("si", "rt_distance")


class InvariantViolation(RuntimeError):
    """A guarantee the algorithm relies on did not hold in some slot."""

    def __init__(self, slot: int, message: str, candidates: Sequence[Candidate] = ()):
        super().__init__(f"slot {slot}: {message}")
        self.slot = slot
        self.candidates = list(candidates)


@dataclass(frozen=True)
class EngineOptions:
    selection_prc_sign: int = 1
    selection_prc_beta: bool = False
    stable_sort: str = "si"

    def __post_init__(self) -> None:
        if self.selection_prc_sign not in (1, -1):
            raise ValueError(f"selection_prc_sign must be +1 or -1, got {self.selection_prc_sign}")
        if self.stable_sort not in STABLE_SORTS:
            raise ValueError(f"stable_sort must be one of {STABLE_SORTS}, got {self.stable_sort!r}")


def stability_index(first_arrival: int, duration: int, horizon: int) -> float:
    span = horizon - first_arrival
    if span <= 0:
        return 1.0
    if duration <= span / 2:
        return min(1.0, max(0.0, 2 * duration / span))
    return 1.0


@dataclass(frozen=True)
class StabilityRecord:
    node: str
    first_arrival: int | None
    duration: int
    si: float


def stability_records(
    history: Mapping[str, tuple[int, int]],
    candidates: Iterable[str],
    horizon: int,
) -> dict[str, StabilityRecord]:
    # no completed slot in the group yet means no evidence of stability
    out = {}
    for d in sorted(candidates):
        if d in history:
            a, h = history[d]
            si = stability_index(a, h, horizon) if h > 0 else 0.0
            out[d] = StabilityRecord(d, a, h, si)
        else:
            out[d] = StabilityRecord(d, None, 0, 0.0)
    return out


@dataclass(frozen=True)
class ReferenceTree:
    tree: MulticastTree
    stable_set: frozenset[str]

    @property
    def tau(self) -> int:
        return len(self.stable_set)


def build_reference_tree(
    spt: GlobalSpt,
    records: Mapping[str, StabilityRecord],
    threshold: float,
) -> ReferenceTree:
    stable = frozenset(d for d, r in records.items() if r.si > threshold and d in spt.candidates)
    return ReferenceTree(prune(spt.tree, spt.candidates - stable), stable)


@dataclass
class Candidate:
    index: int
    tree: MulticastTree
    attach: frozenset[str]
    reroute: frozenset[str]
    ledger: SlotLedger | None = None
    discarded: bool = False
    reason: str = ""
    stage: str = "generated"
    stable_attached: tuple[str, ...] = ()

    def summary(self) -> dict:
        return {
            "index": self.index,
            "stage": self.stage,
            "discarded": self.discarded,
            "reason": self.reason,
            "attach": sorted(self.attach),
            "reroute": sorted(self.reroute),
            "stable_attached": list(self.stable_attached),
            "edges": sorted([u, v] for u, v in self.tree.edges),
            "destinations": sorted(self.tree.destinations),
            "ledger": None if self.ledger is None else self.ledger.__dict__,
        }


def generate_candidates(
    prev_tree: MulticastTree,
    prev_dests: Iterable[str],
    cur_dests: Iterable[str],
) -> list[Candidate]:
    """Root-only tree plus nested sprouts of the post-leave tree over stayers
    ordered by their distance from the source in the previous tree."""
    prev, cur = frozenset(prev_dests), frozenset(cur_dests)
    joins = cur - prev
    leave_tree = prune(prev_tree.with_destinations(prev), prev - cur)
    depth = prev_tree.depth
    stayers = sorted(prev & cur, key=lambda d: (depth[d], d))
    trees = [MulticastTree.single(prev_tree.root)] + sprout(leave_tree, stayers)
    out = []
    for l, t in enumerate(trees):
        reroute = frozenset(stayers[l:])
        out.append(Candidate(l, t, joins | reroute, reroute))
    return out


@dataclass(frozen=True)
class SlotContext:
    """Everything a candidate's ledger depends on within one slot."""

    slot: int
    prev_tree: MulticastTree
    prev_dests: frozenset[str]
    cur_dests: frozenset[str]
    prev_deposit: float
    spt: GlobalSpt
    knobs: CostKnobs
    options: EngineOptions = EngineOptions()
    records: Mapping[str, StabilityRecord] = field(default_factory=dict)

    def ledger(self, tree: MulticastTree) -> SlotLedger:
        return draft_ledger(
            tree,
            slot=self.slot,
            prev_tree=self.prev_tree,
            prev_dests=self.prev_dests,
            prev_deposit=self.prev_deposit,
            spt=self.spt,
            knobs=self.knobs,
        )

    def sufficient(self, ledger: SlotLedger) -> bool:
        return sufficient_deposit(ledger.deposit, ledger.potential_rc, self.knobs)


class GrowingTree:
    """A tree that only grows by hanging paths off existing nodes.

    Keeps the ledger terms current so each growth step is charged without
    re-walking the whole tree; :meth:`ledger` matches
    :meth:`SlotContext.ledger` on :meth:`snapshot` exactly.
    """

    def __init__(self, tree: MulticastTree, ctx: SlotContext):
        self.ctx = ctx
        self.root = tree.root
        self.edges: dict[Edge, float] = dict(tree.edges)
        self.parent: dict[str, str | None] = dict(tree.parent)
        self.deg = {v: len(n) for v, n in tree.adjacency.items()}
        self.branches = sum(1 for v, k in self.deg.items() if k >= 3 and v != self.root)
        self.dests: set[str] = set()
        self._adj = ctx.spt.graph._adj
        self._dist: list[float] = []
        self._bud: list[float] = []
        self._old: set[Edge] = set()
        self._new: set[Edge] = set()
        self._rc: dict[Edge, float] = {}
        self._prc: dict[Edge, float] = {}
        for d in sorted(tree.destinations):
            self._add_destination(d)

    def _root_walk(self, parent: Mapping[str, str | None], v: str):
        p = parent[v]
        while p is not None:
            yield edge_key(v, p)
            v, p = p, parent[p]

    def _toggle(self, e: Edge) -> None:
        if e in self._rc:
            del self._rc[e]
        else:
            self._rc[e] = self._adj[e[0]][e[1]]

    def _add_destination(self, d: str) -> None:
        if d in self.dests:
            return
        self.dests.add(d)
        spt = self.ctx.spt
        x = spt.dist[d]
        self._dist.append(x)
        self._bud.append(x + self.ctx.knobs.alpha)
        if d in self.ctx.prev_dests:
            # unions of root paths are upward closed, so stop at the first known edge
            for e in self._root_walk(self.ctx.prev_tree.parent, d):
                if e in self._old:
                    break
                self._old.add(e)
                self._toggle(e)
            for e in self._root_walk(self.parent, d):
                if e in self._new:
                    break
                self._new.add(e)
                self._toggle(e)
        mine = set(self._root_walk(self.parent, d))
        adj = self._adj
        for e in mine.symmetric_difference(spt.path_edges[d]):
            self._prc[e] = adj[e[0]][e[1]]

    def attach(self, path: Sequence[str], weights: Mapping[Edge, float], dest: str) -> None:
        """Hang ``path`` (bottom-up, last node already in the tree) and serve ``dest``."""
        for child, par in zip(path, path[1:]):
            e = edge_key(child, par)
            if e in self.edges:
                continue
            self.edges[e] = weights[e]
            self.parent[child] = par
            for v in (child, par):
                k = self.deg.get(v, 0) + 1
                self.deg[v] = k
                if k == 3 and v != self.root:
                    self.branches += 1
        self._add_destination(dest)

    def ledger(self) -> SlotLedger:
        ctx = self.ctx
        a = ctx.knobs.alpha
        bud = a + math.fsum(self._bud)
        slot_bud = math.fsum(self._dist) + a * len(self.dests)
        return make_ledger(
            ctx.slot,
            math.fsum(self.edges.values()),
            1 + self.branches,
            math.fsum(self._rc.values()),
            bud,
            slot_bud,
            ctx.prev_deposit,
            math.fsum(self._prc.values()),
            ctx.knobs,
        )

    def snapshot(self) -> MulticastTree:
        return MulticastTree(self.root, dict(self.edges), frozenset(self.dests))


def _kruskal(edges: Iterable[tuple[float, str, str]]) -> list[tuple[str, str]]:
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    out = []
    for _, u, v in sorted(edges):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            out.append((u, v))
    return out


def _strip_leaves(edges: dict[Edge, float], keep: set[str]) -> None:
    adj: dict[str, set[str]] = {}
    for u, v in edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    stack = [v for v, n in adj.items() if len(n) == 1 and v not in keep]
    while stack:
        v = stack.pop()
        if v not in adj or len(adj[v]) != 1:
            continue
        (u,) = adj.pop(v)
        del edges[edge_key(u, v)]
        adj[u].discard(v)
        if len(adj[u]) == 1 and u not in keep:
            stack.append(u)


class _Boundary(dict):
    """Lazily filled contraction boundary: outside node -> (inside node, weight)."""

    def __init__(self, adj: Mapping[str, Mapping[str, float]], inside: frozenset[str]):
        super().__init__()
        self.adj = adj
        self.inside = inside

    def __missing__(self, v: str) -> tuple[str, float] | None:
        best = None
        for t, w in self.adj[v].items():
            if t in self.inside and (best is None or w < best[1] or (w == best[1] and t < best[0])):
                best = (t, w)
        self[v] = best
        return best


def _ball_search(g: Graph, r: str, boundary: _Boundary, sup: str) -> ShortestPaths:
    """Dijkstra from ``r`` on ``g`` with the inside nodes merged into ``sup``,
    settling every node no farther than ``sup``.

    Same result as running on the contracted graph with ``radius_of=sup``;
    nodes past ``sup`` are never settled, so its own edges are not needed.
    """
    adj = g._adj
    inside = boundary.inside
    tent = {r: 0.0}
    pred: dict[str, str | None] = {r: None}
    heap = [(0.0, r)]
    done: dict[str, float] = {}
    push, pop = heapq.heappush, heapq.heappop

    def relax(u: str, d: float, v: str, w: float) -> None:
        nd = d + w
        old = tent.get(v)
        if old is None or nd < old:
            tent[v] = nd
            pred[v] = u
            push(heap, (nd, v))
        elif nd == old and u < pred[v]:  # type: ignore[operator]
            pred[v] = u

    while heap:
        d, u = pop(heap)
        if u in done:
            continue
        done[u] = d
        if u == sup:
            break
        for v, w in adj[u].items():
            if v not in inside and v not in done:
                relax(u, d, v, w)
        hop = boundary[u]
        if hop is not None and sup not in done:
            relax(u, d, sup, hop[1])
    # nodes tied with the supernode's distance still count as inside the ball
    bound = done.get(sup, math.inf)
    while heap and heap[0][0] <= bound:
        d, u = heapq.heappop(heap)
        if u not in done:
            done[u] = d
    return ShortestPaths((r,), done, {n: pred[n] for n in done})


def rest_mst_tree(g: Graph, base: MulticastTree, rest: Sequence[str]) -> MulticastTree:
    """Attach ``rest`` to ``base`` through a metric-closure MST on the graph
    with ``base`` contracted to a single source node."""
    rest = sorted(set(rest))
    if not rest:
        return base
    sup = fresh_node_id(g, base.root)
    boundary = _Boundary(g._adj, base.nodes)
    terminals = set(rest) | {sup}
    # a terminal pair farther apart than both are from the supernode is the
    # strict maximum of a triangle and never enters the MST, so each search
    # only needs the ball reaching the supernode
    runs = {r: _ball_search(g, r, boundary, sup) for r in rest}
    closure = []
    src_of: dict[tuple[str, str], str] = {}
    for i, r in enumerate(rest):
        run = runs[r]
        if sup not in run.dist:
            raise UnreachableError(base.root, r)
        closure.append((run.dist[sup], *sorted((sup, r))))
        for r2 in rest[i + 1:]:
            for a in (r, r2):
                b = r2 if a == r else r
                if b in runs[a].dist:
                    closure.append((runs[a].dist[b], r, r2))
                    src_of[(r, r2)] = a
                    break
    gadj = g._adj
    union: dict[Edge, float] = {}
    for a, b in _kruskal(closure):
        if a == sup or b == sup:
            r = b if a == sup else a
            path = runs[r].path(sup).nodes
        else:
            lo, hi = min(a, b), max(a, b)
            start = src_of[(lo, hi)]
            path = runs[start].path(hi if start == lo else lo).nodes
        for x, y in zip(path, path[1:]):
            union[edge_key(x, y)] = boundary[x][1] if y == sup else gadj[x][y]
    # overlapping expanded paths may close cycles
    kept = _kruskal((w, u, v) for (u, v), w in union.items())
    sub = {edge_key(u, v): union[edge_key(u, v)] for u, v in kept}
    _strip_leaves(sub, terminals)
    edges = dict(base.edges)
    for (u, v), w in sub.items():
        if u == sup or v == sup:
            outside = v if u == sup else u
            inside, w0 = boundary[outside]  # type: ignore[misc]
            edges[edge_key(inside, outside)] = w0
        else:
            edges[(u, v)] = w
    return MulticastTree(base.root, edges, base.destinations | frozenset(rest))


def _stable_order(nodes: Iterable[str], ctx: SlotContext, rt: ReferenceTree) -> list[str]:
    if ctx.options.stable_sort == "si":
        recs = ctx.records
        return sorted(nodes, key=lambda d: (recs[d].si, d))
    depth = rt.tree.depth
    return sorted(nodes, key=lambda d: (depth[d], d))


def patch_candidate(cand: Candidate, rt: ReferenceTree, ctx: SlotContext) -> Candidate:
    """Attach stable destinations along the reference tree as far as the
    deposit allows, then the rest via contraction+MST or, failing that, via
    shortest-path-tree grafting; discard if neither keeps the deposit."""
    spt = ctx.spt
    base = cand.tree
    qs = _stable_order((d for d in cand.attach if d in rt.stable_set), ctx, rt)

    # stable attach: T^{l_m} = cand ⊕ (m-prefix of sprouting the RT subtree)
    best_m, paths = 0, []
    if qs:
        sub = prune(rt.tree, rt.stable_set - set(qs))
        grower = GrowingTree(base, ctx)
        for m, q in enumerate(qs, start=1):
            path = graft_path(base.nodes, sub, q)
            paths.append(path)
            grower.attach(path, sub.edges, q)
            if ctx.sufficient(grower.ledger()):
                best_m = m
        if best_m:
            edges = dict(base.edges)
            for path in paths[:best_m]:
                for x, y in zip(path, path[1:]):
                    e = edge_key(x, y)
                    edges[e] = sub.edges[e]
            base = MulticastTree(base.root, edges, base.destinations | frozenset(qs[:best_m]))
    stable_attached = tuple(qs[:best_m])

    # destinations already on the tree as relays are served for free
    relays = frozenset(d for d in ctx.cur_dests if d in base.nodes) - base.destinations
    if relays:
        base = base.with_destinations(base.destinations | relays)
    rest = sorted(d for d in ctx.cur_dests if d not in base.nodes)

    def finish(tree: MulticastTree, ledger: SlotLedger, stage: str) -> Candidate:
        return replace(cand, tree=tree, ledger=ledger, stage=stage, stable_attached=stable_attached)

    if not rest:
        led = ctx.ledger(base)
        if ctx.sufficient(led):
            return finish(base, led, "stable")
        out = finish(base, led, "stable")
        out.discarded, out.reason = True, "insufficient deposit after stable attach"
        return out

    mst = rest_mst_tree(spt.graph, base, rest)
    led = ctx.ledger(mst)
    if ctx.sufficient(led):
        return finish(mst, led, "rest-mst")
    spt_part = prune(spt.tree, spt.candidates - frozenset(rest))
    alt = graft(base, spt_part)
    led = ctx.ledger(alt)
    out = finish(alt, led, "rest-spt")
    if not ctx.sufficient(led):
        out.discarded, out.reason = True, "insufficient deposit for both rest attachments"
    return out


def selection_score(ledger: SlotLedger, knobs: CostKnobs, options: EngineOptions) -> float:
    scale = knobs.beta if options.selection_prc_beta else 1.0
    return knobs.gamma * ledger.deposit + (1 - knobs.gamma) * options.selection_prc_sign * scale * ledger.potential_rc


def select_final(
    candidates: Sequence[Candidate],
    knobs: CostKnobs,
    options: EngineOptions = EngineOptions(),
    slot: int = 0,
) -> Candidate:
    best, best_g = None, -math.inf
    for c in candidates:
        if c.discarded or c.ledger is None:
            continue
        g = selection_score(c.ledger, knobs, options)
        if best is None or g > best_g:
            best, best_g = c, g
    if best is None:
        raise InvariantViolation(slot, "every candidate was discarded", candidates)
    return best


@dataclass(frozen=True)
class ObstaProblem:
    """Immutable per-scenario inputs shared by every slot."""

    spt: GlobalSpt
    knobs: CostKnobs
    options: EngineOptions = EngineOptions()
    horizon: int | None = None

    @property
    def source(self) -> str:
        return self.spt.source


@dataclass(frozen=True)
class SlotState:
    slot: int
    tree: MulticastTree
    deposit: float = 0.0
    prc: float = 0.0
    history: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    budget_sum: float = 0.0
    total_sum: float = 0.0

    @classmethod
    def initial(cls, source: str) -> SlotState:
        return cls(0, MulticastTree.single(source))

    @property
    def destinations(self) -> frozenset[str]:
        return self.tree.destinations


@dataclass
class StepResult:
    ledger: SlotLedger
    tree: MulticastTree
    selected: int
    candidates: list[Candidate]
    reference: ReferenceTree
    timings: dict[str, float]
    feasible: bool
    deposit_ok: bool
    budget_ok: bool


def step(
    problem: ObstaProblem,
    state: SlotState,
    joins: Iterable[str] = (),
    leaves: Iterable[str] = (),
    *,
    strict: bool = True,
) -> tuple[SlotState, StepResult]:
    joins, leaves = frozenset(joins), frozenset(leaves)
    i = state.slot + 1
    prev = state.destinations
    cand_set = problem.spt.candidates
    bad = joins - cand_set
    if bad:
        raise ValueError(f"slot {i}: join of non-candidate nodes {sorted(bad)}")
    bad = joins & prev
    if bad:
        raise ValueError(f"slot {i}: join of nodes already in the group {sorted(bad)}")
    bad = leaves - prev
    if bad:
        raise ValueError(f"slot {i}: leave of non-members {sorted(bad)}")
    cur = (prev - leaves) | joins
    knobs = problem.knobs
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    history = dict(state.history)
    for d in joins:
        if d not in history:
            history[d] = (i, 0)
    horizon = problem.horizon if problem.horizon is not None else i
    records = stability_records(history, cand_set, horizon)
    rt = build_reference_tree(problem.spt, records, knobs.stability_threshold)
    t1 = time.perf_counter()
    timings["reference_tree"] = t1 - t0

    cands = generate_candidates(state.tree, prev, cur)
    t2 = time.perf_counter()
    timings["generation"] = t2 - t1

    ctx = SlotContext(i, state.tree, prev, cur, state.deposit, problem.spt, knobs, problem.options, records)
    patched = [patch_candidate(c, rt, ctx) for c in cands]
    t3 = time.perf_counter()
    timings["patching"] = t3 - t2

    chosen = select_final(patched, knobs, problem.options, slot=i)
    t4 = time.perf_counter()
    timings["selection"] = t4 - t3

    led = chosen.ledger
    assert led is not None
    tree = chosen.tree
    feasible = tree.destinations == cur and tree.is_valid()
    dep_ok = sufficient_deposit(led.deposit, led.potential_rc, knobs)
    budget_sum = state.budget_sum + led.budget
    total_sum = state.total_sum + led.total
    bud_ok = budget_sum >= total_sum - EPS
    if strict and not (feasible and dep_ok and bud_ok):
        what = [n for n, ok in (("feasibility", feasible), ("deposit sufficiency", dep_ok), ("budget dominance", bud_ok)) if not ok]
        raise InvariantViolation(i, f"{', '.join(what)} violated by candidate {chosen.index}", patched)

    for d in cur:
        a, h = history[d]
        history[d] = (a, h + 1)
    new_state = SlotState(i, tree, led.deposit, led.potential_rc, history, budget_sum, total_sum)
    return new_state, StepResult(led, tree, chosen.index, patched, rt, timings, feasible, dep_ok, bud_ok)


class Obsta:
    """Stateful convenience wrapper around :func:`step`."""

    def __init__(
        self,
        graph: Graph,
        source: str,
        candidates: Iterable[str],
        knobs: CostKnobs = CostKnobs(),
        options: EngineOptions = EngineOptions(),
        horizon: int | None = None,
        *,
        spt: GlobalSpt | None = None,
        strict: bool = True,
    ):
        from obsta.graph import global_spt

        if spt is None:
            spt = global_spt(graph, source, candidates)
        self.problem = ObstaProblem(spt, knobs, options, horizon)
        self.state = SlotState.initial(source)
        self.strict = strict

    @property
    def tree(self) -> MulticastTree:
        return self.state.tree

    def step(self, joins: Iterable[str] = (), leaves: Iterable[str] = ()) -> StepResult:
        self.state, result = step(self.problem, self.state, joins, leaves, strict=self.strict)
        return result
