import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obsta.graph import Graph, edge_key
from obsta.tree import (
    MulticastTree,
    TreeError,
    branch_count,
    contract,
    contract_nodes,
    graft,
    prune,
    sprout,
    sym_diff,
    tree_weight,
)
from naive import (
    naive_contract,
    naive_graft,
    naive_prune,
    naive_sprout,
    naive_sym_diff,
    random_graph,
    random_subtree,
    tree_path_edges,
)


def T(root, edges, dests):
    return MulticastTree(root, {edge_key(u, v): float(w) for u, v, w in edges}, frozenset(dests))


ST_TREE = T("s", [("s", "b", 6.2), ("b", "d1", 4), ("b", "d2", 4)], {"d1", "d2"})


def test_prune_examples():
    t = T("s", [("s", "a", 7.5), ("a", "d1", 2.5), ("d1", "d2", 6)], {"d1", "d2"})
    assert prune(t, set()).edges == t.edges
    assert prune(t, {"d1", "d2"}).edges == {}
    assert prune(t, {"d2"}).edges == {("a", "s"): 7.5, ("a", "d1"): 2.5}
    with pytest.raises(TreeError):
        prune(t, {"a"})


def test_sym_diff_examples():
    t1 = T("s", [("s", "a", 7.5), ("a", "d1", 2.5)], {"d1"})
    t2 = T("s", [("s", "b", 6.2), ("b", "d1", 4)], {"d1"})
    d = sym_diff(t1, t2)
    assert set(d.edges) == set(t1.edges) | set(t2.edges)
    assert d.weight == pytest.approx(20.2, abs=1e-9)
    assert sym_diff(t1, t1).weight == 0 and not sym_diff(t1, t1).edges
    assert sym_diff({}, t2.edges).edges == t2.edges


def test_sprout_three_leaves():
    a = T("s", [("s", "x", 1), ("x", "a1", 1), ("x", "a2", 2), ("s", "a3", 3)], {"a1", "a2", "a3"})
    a1, a2, a3 = sprout(a, ["a1", "a2", "a3"])
    assert set(a1.edges) == {("s", "x"), ("a1", "x")}
    assert set(a2.edges) == set(a1.edges) | {("a2", "x")}
    assert a3.edges == a.edges
    assert a2.destinations == {"a1", "a2"}
    assert sprout(a, []) == []
    with pytest.raises(TreeError):
        sprout(a, ["zz"])


def test_graft_shared_attachments():
    a = T("s", [("s", "u1", 1), ("u1", "u3", 1), ("u3", "d5", 1), ("s", "u2", 1)], {"d5", "u2"})
    b = T(
        "s",
        [
            ("s", "u1", 1), ("u1", "d1", 2), ("u1", "d2", 2), ("s", "u2", 1), ("u2", "d3", 3),
            ("d3", "d4", 1), ("u1", "u3", 1), ("u3", "d5", 1), ("u3", "d6", 4),
        ],
        {"d1", "d2", "d3", "d4", "d5", "d6"},
    )
    g = graft(a, b)
    added = set(g.edges) - set(a.edges)
    assert added == {("d1", "u1"), ("d2", "u1"), ("d3", "u2"), ("d3", "d4"), ("d6", "u3")}
    assert g.destinations == a.destinations | b.destinations
    g.validate()
    assert graft(a, a).edges == a.edges
    single = MulticastTree.single("s")
    assert graft(single, b).edges == b.edges
    with pytest.raises(TreeError):
        graft(a, MulticastTree.single("x"))


def test_contract_toy(toy):
    t = T("s", [("s", "a", 7.5), ("a", "d1", 2.5)], {"d1"})
    cg, sup = contract(toy.graph, t)
    assert sup == "s'"
    assert dict(cg.neighbors(sup)) == {"b": 4.0, "c": 2.0, "d2": 6.0}
    assert set(cg.nodes) == {"s'", "b", "c", "d2"}
    assert cg.weight("b", "d2") == 4.0


def test_contract_single_node_and_min_rule():
    g = Graph(edges=[("x", "v", 3), ("y", "v", 5), ("x", "y", 1), ("v", "w", 2)])
    cg, sup, _ = contract_nodes(g, {"x", "y"}, "B")
    assert cg.weight("B", "v") == 3.0
    cg1, sup1, _ = contract_nodes(g, {"v"}, "V")
    assert dict(cg1.neighbors("V")) == {"x": 3.0, "y": 5.0, "w": 2.0}


def test_contract_errors(toy):
    with pytest.raises(TreeError):
        contract(toy.graph, T("s", [("s", "a", 7.5), ("c", "d2", 4)], {"d2"}))
    with pytest.raises(TreeError):
        contract_nodes(toy.graph, set())


def test_branch_count_examples():
    assert branch_count(T("s", [("s", "a", 1), ("a", "d1", 1)], {"d1"})) == 1
    assert branch_count(ST_TREE) == 2
    star = T("s", [("s", f"d{k}", 1) for k in range(5)], {f"d{k}" for k in range(5)})
    assert branch_count(star) == 1
    assert tree_weight(ST_TREE) == pytest.approx(14.2, abs=1e-12)


def test_validate_rejects_bad_trees():
    with pytest.raises(TreeError, match="leaf"):
        T("s", [("s", "a", 1), ("a", "b", 1)], {"a"}).validate()
    with pytest.raises(TreeError, match="cycle"):
        T("s", [("s", "a", 1), ("a", "b", 1), ("s", "b", 1)], {"b"}).validate()
    with pytest.raises(TreeError):
        T("s", [("s", "a", 1), ("x", "y", 1)], {"a", "y"}).validate()


instances = st.tuples(st.integers(0, 2**31), st.integers(2, 9))


def _instance(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.35)
    return rng, g, random_subtree(rng, g, "n0")


@settings(max_examples=150, deadline=None)
@given(instances)
def test_prune_matches_leaf_stripping(inst):
    rng, g, t = _instance(*inst)
    dests = sorted(t.destinations)
    leaving = [d for d in dests if rng.random() < 0.5]
    p = prune(t, leaving)
    assert p.edges == naive_prune(t, leaving)
    assert prune(p, ()).edges == p.edges
    p.validate()


@settings(max_examples=150, deadline=None)
@given(instances)
def test_sym_diff_weight_identity(inst):
    rng, g, t = _instance(*inst)
    u = random_subtree(rng, g, "n0")
    d = sym_diff(t, u)
    assert d.edges == naive_sym_diff(t.edges, u.edges)
    assert sym_diff(u, t).edges == d.edges
    common = sum(w for e, w in t.edges.items() if e in u.edges)
    assert d.weight == pytest.approx(tree_weight(t) + tree_weight(u) - 2 * common, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(instances)
def test_sprout_nested_path_unions(inst):
    rng, g, t = _instance(*inst)
    nodes = sorted(t.nodes)
    seq = [nodes[int(k)] for k in rng.permutation(len(nodes))]
    subs = sprout(t, seq)
    ref = naive_sprout(t, seq)
    for a, b in zip(subs, ref):
        assert set(a.edges) == b
    for a, b in zip(subs, subs[1:]):
        assert set(a.edges) <= set(b.edges)


@settings(max_examples=150, deadline=None)
@given(instances)
def test_graft_matches_walk(inst):
    rng, g, a = _instance(*inst)
    b = random_subtree(rng, g, "n0")
    out = graft(a, b)
    assert out.edges == naive_graft(a, b)
    assert set(a.edges) <= set(out.edges)
    assert out.destinations == a.destinations | b.destinations
    out.validate()


@settings(max_examples=100, deadline=None)
@given(instances)
def test_contract_matches_min_rule(inst):
    rng, g, t = _instance(*inst)
    cg, sup = contract(g, t)
    got = {v: dict(cg.neighbors(v)) for v in cg.nodes}
    assert got == naive_contract(g, t.nodes, sup)


@settings(max_examples=100, deadline=None)
@given(instances)
def test_parent_paths_agree_with_tree_paths(inst):
    _, _, t = _instance(*inst)
    for d in t.nodes:
        assert set(t.path_edges(d)) == tree_path_edges(t.edges, t.root, d)
