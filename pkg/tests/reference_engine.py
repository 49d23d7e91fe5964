"""Definition-following slot step: every ledger from scratch, contraction
materialised, full metric closure. Same tie-breaks as the engine."""

from __future__ import annotations

from obsta.cost import sufficient_deposit
from obsta.engine import (
    SlotContext,
    build_reference_tree,
    generate_candidates,
    select_final,
    stability_records,
)
from obsta.graph import dijkstra, edge_key
from obsta.tree import MulticastTree, contract_nodes, fresh_node_id, graft, prune, sprout


def _kruskal(items):
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            x = parent[x]
        return x

    out = []
    for _, u, v in sorted(items):
        a, b = find(u), find(v)
        if a != b:
            parent[a] = b
            out.append((u, v))
    return out


def rest_mst(g, base, rest):
    cg, sup, boundary = contract_nodes(g, base.nodes, fresh_node_id(g, base.root))
    runs = {r: dijkstra(cg, r) for r in rest}
    closure = []
    for i, r in enumerate(rest):
        closure.append((runs[r].dist[sup], *sorted((sup, r))))
        for r2 in rest[i + 1:]:
            closure.append((runs[r].dist[r2], r, r2))
    union = {}
    for a, b in _kruskal(closure):
        if sup in (a, b):
            r = b if a == sup else a
            ns = runs[r].path(sup).nodes
        else:
            ns = runs[min(a, b)].path(max(a, b)).nodes
        for x, y in zip(ns, ns[1:]):
            union[edge_key(x, y)] = cg.weight(x, y)
    kept = {edge_key(u, v): union[edge_key(u, v)] for u, v in _kruskal((w, u, v) for (u, v), w in union.items())}
    keep = set(rest) | {sup}
    while True:
        deg = {}
        for u, v in kept:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        leaves = [e for e in kept if any(deg[x] == 1 and x not in keep for x in e)]
        if not leaves:
            break
        for e in leaves:
            kept.pop(e, None)
    edges = dict(base.edges)
    for (u, v), w in kept.items():
        if sup in (u, v):
            out = v if u == sup else u
            t, w0 = boundary[out]
            edges[edge_key(t, out)] = w0
        else:
            edges[(u, v)] = w
    return MulticastTree(base.root, edges, base.destinations | frozenset(rest))


def patch(cand, rt, ctx: SlotContext):
    ok = lambda led: sufficient_deposit(led.deposit, led.potential_rc, ctx.knobs)
    recs = ctx.records
    if ctx.options.stable_sort == "si":
        qs = sorted((d for d in cand.attach if d in rt.stable_set), key=lambda d: (recs[d].si, d))
    else:
        qs = sorted((d for d in cand.attach if d in rt.stable_set), key=lambda d: (rt.tree.depth[d], d))
    tree = cand.tree
    if qs:
        sub = prune(rt.tree, rt.stable_set - set(qs))
        for piece in reversed(sprout(sub, qs)):
            t = graft(cand.tree, piece)
            if ok(ctx.ledger(t)):
                tree = t
                break
    cur = ctx.cur_dests
    tree = tree.with_destinations(tree.destinations | {d for d in cur if d in tree.nodes})
    rest = sorted(d for d in cur if d not in tree.nodes)
    if not rest:
        led = ctx.ledger(tree)
        return tree, led, ok(led), "stable"
    t = rest_mst(ctx.spt.graph, tree, rest)
    led = ctx.ledger(t)
    if ok(led):
        return t, led, True, "rest-mst"
    t = graft(tree, prune(ctx.spt.tree, ctx.spt.candidates - set(rest)))
    led = ctx.ledger(t)
    return t, led, ok(led), "rest-spt"


def reference_run(spt, knobs, options, slots, horizon):
    """Yield (tree, ledger, stages) per slot."""
    tree = MulticastTree.single(spt.source)
    dep = 0.0
    history = {}
    for i, (joins, leaves) in enumerate(slots, start=1):
        prev = tree.destinations
        cur = (prev - set(leaves)) | set(joins)
        for d in joins:
            history.setdefault(d, (i, 0))
        recs = stability_records(history, spt.candidates, horizon if horizon is not None else i)
        rt = build_reference_tree(spt, recs, knobs.stability_threshold)
        ctx = SlotContext(i, tree, prev, frozenset(cur), dep, spt, knobs, options, recs)
        cands = generate_candidates(tree, prev, cur)
        stages = []
        for c in cands:
            t, led, good, stage = patch(c, rt, ctx)
            c.tree, c.ledger, c.discarded, c.stage = t, led, not good, stage
            stages.append((stage, not good))
        best = select_final(cands, knobs, options, slot=i)
        tree, dep = best.tree, best.ledger.deposit
        for d in cur:
            a, h = history[d]
            history[d] = (a, h + 1)
        yield tree, best.ledger, stages
