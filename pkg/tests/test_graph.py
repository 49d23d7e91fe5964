import io
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obsta.graph import (
    Graph,
    GraphError,
    UnreachableError,
    dijkstra,
    dump_topology,
    global_spt,
    load_topology,
    shortest_path,
)
from naive import random_graph, to_nx


def test_toy_distances(toy):
    sp = dijkstra(toy.graph, "s")
    assert sp.dist["d1"] == 10.0
    assert sp.dist["d2"] == pytest.approx(10.2, abs=1e-12)
    assert sp.path("d1").nodes == ("s", "a", "d1")
    assert sp.path("d2").nodes == ("s", "b", "d2")


def test_tie_prefers_smaller_predecessor():
    # two equal-length routes to t: via x and via y
    g = Graph(edges=[("s", "y", 1), ("s", "x", 1), ("y", "t", 1), ("x", "t", 1)])
    assert shortest_path(g, "s", "t").nodes == ("s", "x", "t")
    g2 = Graph(edges=[("s", "b", 2), ("s", "a", 1), ("a", "b", 1)])
    assert shortest_path(g2, "s", "b").nodes == ("s", "a", "b")


def test_parallel_edges_keep_minimum():
    g = Graph(edges=[("u", "v", 5), ("v", "u", 3)])
    assert g.weight("u", "v") == 3.0
    assert g.num_edges == 1


@pytest.mark.parametrize("bad", [("u", "u", 1), ("u", "v", 0), ("u", "v", -1), ("u", "v", math.inf)])
def test_invalid_edges(bad):
    with pytest.raises(GraphError):
        Graph(edges=[bad])


def test_unreachable():
    g = Graph(["z"], [("s", "a", 1)])
    with pytest.raises(UnreachableError):
        shortest_path(g, "s", "z")
    with pytest.raises(UnreachableError):
        global_spt(g, "s", ["a", "z"])


def test_topology_roundtrip_and_isolated_nodes():
    text = "# comment\ns a 1.5\na b 0.1\nlonely\n\nb s 2  # trailing\n"
    g = load_topology(io.StringIO(text))
    assert "lonely" in g and g.degree("lonely") == 0
    buf = io.StringIO()
    dump_topology(g, buf)
    assert load_topology(io.StringIO(buf.getvalue())) == g


@pytest.mark.parametrize("line", ["a b", "a b c d", "a b x", "a a 1", "a b -2"])
def test_topology_errors_name_the_line(line):
    with pytest.raises(GraphError, match="line 2"):
        load_topology(io.StringIO("s a 1\n" + line + "\n"))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 25), st.booleans())
def test_distances_match_networkx(seed, n, integral):
    g = random_graph(np.random.default_rng(seed), n, 0.2, integral)
    sp = dijkstra(g, "n0")
    ref = nx.single_source_dijkstra_path_length(to_nx(g), "n0")
    assert set(sp.dist) == set(ref)
    for v, d in ref.items():
        assert sp.dist[v] == pytest.approx(d, abs=1e-9)
        p = sp.path(v)
        assert math.fsum(g.weight(a, b) for a, b in zip(p.nodes, p.nodes[1:])) == pytest.approx(d, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_targets_and_radius_settle_prefix(seed):
    g = random_graph(np.random.default_rng(seed), 15, 0.2)
    full = dijkstra(g, "n0")
    part = dijkstra(g, "n0", targets=["n7", "n3"])
    assert {"n7", "n3"} <= set(part.dist)
    for v, d in part.dist.items():
        assert full.dist[v] == d and full.pred[v] == part.pred[v]
    ball = dijkstra(g, "n0", radius_of="n5")
    assert set(ball.dist) == {v for v, d in full.dist.items() if d <= full.dist["n5"]}


def test_global_spt_paths_are_shortest(toy):
    spt = global_spt(toy.graph, "s", toy.candidates)
    assert spt.tree.edges == {("a", "s"): 7.5, ("a", "d1"): 2.5, ("b", "s"): 6.2, ("b", "d2"): 4.0}
    assert spt.candidates == {"d1", "d2"}
