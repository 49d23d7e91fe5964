import json
import math

import numpy as np
import pytest

from obsta.cost import CostKnobs
from obsta.scenario import (
    HardnessParams,
    RandomParams,
    ScenarioError,
    SlotEvents,
    generate_hardness_instance,
    generate_random_scenario,
    load_scenario,
    parse_trace,
    path_graph,
    save_scenario,
)


def test_roundtrip(tmp_path, toy):
    sc = generate_random_scenario(RandomParams(nodes=15, group_size=5, n_slots=7), seed=3, knobs=CostKnobs(alpha=0.5, beta=0.6))
    for s in (sc, toy):
        assert load_scenario(save_scenario(s, str(tmp_path), "x")) == s


def test_trace_errors_name_the_slot(tmp_path, toy):
    with pytest.raises(ScenarioError) as e:
        list(parse_trace(['{"slot": 1, "join": ["d1"]}', '{"slot": 2, "join": [3]}']))
    assert e.value.slot == 2
    with pytest.raises(ScenarioError, match="line 1"):
        list(parse_trace(["not json"]))
    with pytest.raises(ScenarioError) as e:
        type(toy)(toy.graph, "s", toy.candidates, [SlotEvents(1, ("d1",)), SlotEvents(2, ("d1",))], toy.knobs)
    assert e.value.slot == 2
    path = save_scenario(toy, str(tmp_path), "y")
    hdr = json.load(open(path))
    hdr["colour"] = 1
    json.dump(hdr, open(path, "w"))
    with pytest.raises(ScenarioError, match="unknown"):
        load_scenario(path)


@pytest.mark.parametrize(
    "slots",
    [
        [SlotEvents(1, ("a",))],  # not a candidate
        [SlotEvents(2, ("d1",))],  # slots must count from 1
        [SlotEvents(1, (), ("d1",))],  # leave without join
        [SlotEvents(1, ("d1",), ("d1",))],
    ],
)
def test_invalid_traces(toy, slots):
    with pytest.raises(ScenarioError):
        type(toy)(toy.graph, "s", toy.candidates, slots, toy.knobs).validate()


def test_zero_churn_freezes_group():
    sc = generate_random_scenario(RandomParams(nodes=30, group_size=10, churn=0.0, n_slots=8), seed=2)
    assert all(not ev.joins and not ev.leaves for ev in sc.slots[1:])
    assert sc == generate_random_scenario(RandomParams(nodes=30, group_size=10, churn=0.0, n_slots=8), seed=2)


def _independent_sampler(p: RandomParams, seed: int):
    """The documented sampling order, written without the package's helpers."""
    rng = np.random.default_rng(seed)
    n = p.nodes
    w = len(str(n - 1))
    name = lambda i: "v" + str(i).zfill(max(3, w))
    edges = set()
    perm = rng.permutation(n)
    for k in range(1, n):
        j = perm[rng.integers(k)]
        edges.add(tuple(sorted((int(perm[k]), int(j)))))
    u = rng.random(n * (n - 1) // 2)
    idx = 0
    for i in range(n):
        for j in range(i + 1, n):
            if u[idx] < p.edge_density:
                edges.add((i, j))
            idx += 1
    edges = sorted(edges)
    ws = rng.uniform(1, 10, len(edges))
    wmap = {(name(i), name(j)): float(x) for (i, j), x in zip(edges, ws)}
    cands = sorted(name(int(k) + 1) for k in rng.choice(n - 1, p.group_size, replace=False))
    present, traces = set(), []
    for slot in range(1, p.n_slots + 1):
        u = rng.random(len(cands))
        j, l = [], []
        for d, x in zip(cands, u):
            if slot == 1:
                if x < p.initial_join:
                    j.append(d)
            elif d in present:
                if x < p.churn * p.bias_leave:
                    l.append(d)
            elif x < p.churn * p.bias_join:
                j.append(d)
        present = (present - set(l)) | set(j)
        traces.append((tuple(j), tuple(l)))
    return wmap, cands, traces


def test_generator_matches_independent_sampler():
    p = RandomParams(nodes=60, group_size=20, n_slots=50)
    sc = generate_random_scenario(p, seed=1)
    wmap, cands, traces = _independent_sampler(p, 1)
    assert {(u, v): w for u, v, w in sc.graph.edges()} == wmap
    assert sorted(sc.candidates) == cands and sc.source == "v000"
    assert [(ev.joins, ev.leaves) for ev in sc.slots] == traces
    sc.validate()


@pytest.mark.parametrize("m", [2, 3])
def test_hardness_structure(m):
    base = path_graph(m)
    sc = generate_hardness_instance(HardnessParams(base, "h0", order=list(reversed(base.nodes))))
    sc.validate()
    assert len(sc.graph) == 1 + m * m
    assert all(w == 1.0 for _, _, w in sc.graph.edges())
    assert sc.n_slots == 2 * m * m
    sizes = [len(x) for x in sc.memberships()]
    assert max(sizes) == m * m and sizes[m * m - 1] == m * m and sizes[-1] == 0
    assert sc.knobs.alpha == m * (m * m + 1) / 2
    joins = [ev.joins[0] for ev in sc.slots[: m * m]]
    perm = list(reversed(base.nodes))
    assert joins == [f"{perm[(i - 1) % m]}@{math.ceil(i / m)}" for i in range(1, m * m + 1)]


def test_hardness_small_counts():
    sc = generate_hardness_instance(HardnessParams(path_graph(2), "h0"))
    assert (len(sc.graph), sc.n_slots, sc.knobs.alpha) == (5, 8, 5.0)
    with pytest.raises(ValueError):
        HardnessParams(path_graph(2), "zz")
    with pytest.raises(ValueError):
        HardnessParams(path_graph(2), "h0", order=["h0"])
