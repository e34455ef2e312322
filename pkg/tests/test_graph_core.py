import json

import numpy as np
import pytest

from fairim.errors import ParameterError, ParseError
from fairim.graph_core import (
    CommunityRule,
    CommunityStructure,
    DirectedWeightedGraph,
    GeneratorSpec,
    WeightRule,
    default_weight_rule,
    generate_communities,
    generate_graph,
    graph_from_json,
    graph_to_json,
    imbalanced_sizes,
    load_communities,
    load_edge_list,
    load_instance,
    planted_communities,
    rebuild,
    save_instance,
)


def test_graph_indexes_consistent(rng):
    from conftest import random_graph

    for _ in range(20):
        g = random_graph(rng, 6, 15)
        out = sorted((u, int(v)) for u in range(g.n) for v in g.out_neighbors(u))
        inn = sorted((int(u), v) for v in range(g.n) for u in g.in_neighbors(v))
        arcs = sorted((u, v) for u, v, _ in g.arcs())
        assert out == inn == arcs
        assert g.out_degree.sum() == g.in_degree.sum() == g.num_arcs


def test_graph_rejects_bad_input():
    with pytest.raises(ParameterError):
        DirectedWeightedGraph.from_arcs(2, [(0, 1, 1.5)])
    with pytest.raises(ParameterError):
        DirectedWeightedGraph.from_arcs(2, [(0, 2, 0.5)])
    with pytest.raises(ParameterError):
        DirectedWeightedGraph.from_arcs(2, [(0, 1, 0.5), (0, 1, 0.2)])
    # self-loops are allowed by the data model
    assert DirectedWeightedGraph.from_arcs(1, [(0, 0, 0.3)]).num_arcs == 1


def test_graph_is_immutable():
    g = DirectedWeightedGraph.from_arcs(2, [(0, 1, 0.5)])
    with pytest.raises(ValueError):
        g.weight[0] = 0.1


def test_communities_validation():
    with pytest.raises(ParameterError):
        CommunityStructure(3, ())
    with pytest.raises(ParameterError):
        CommunityStructure(3, ((),))
    with pytest.raises(ParameterError):
        CommunityStructure(3, ((0, 3),))
    c = CommunityStructure(4, ((1, 0), (1,)))
    assert c.communities == ((0, 1), (1,))
    assert c.sizes.tolist() == [2, 1]
    assert c.membership.toarray().tolist() == [[1, 1, 0, 0], [0, 1, 0, 0]]


def test_core_periphery_has_200_nodes():
    spec = GeneratorSpec("core-periphery", {}, WeightRule.constant(0.05), seed=3)
    g = generate_graph(spec)
    assert g.n == 200
    assert np.all(g.weight == 0.05)
    comms = planted_communities(spec)
    assert comms.sizes.tolist() == [50, 150]


def test_block_stochastic_complete():
    spec = GeneratorSpec("block-stochastic", {"sizes": [3], "p": 1.0, "q": 0.0}, WeightRule.constant(1.0))
    g = generate_graph(spec)
    assert g.n == 3 and g.num_arcs == 6
    assert sorted((u, v) for u, v, _ in g.arcs()) == [(u, v) for u in range(3) for v in range(3) if u != v]


def test_ba_deterministic_and_symmetric():
    spec = GeneratorSpec("barabasi-albert", {"n": 40, "attachment": 2}, WeightRule.uniform(0, 0.4), seed=11)
    a, b = generate_graph(spec), generate_graph(spec)
    assert a.arcs() == b.arcs()
    w = {(u, v): x for u, v, x in a.arcs()}
    assert all(w[(v, u)] == x for (u, v), x in w.items())
    # 38 newcomers with two edges each
    assert a.num_arcs == 2 * 2 * 38
    c = generate_graph(spec.replace_seed(12))
    assert c.arcs() != a.arcs()


@pytest.mark.parametrize("params", [{"p": 1.5}, {"q": -0.1}, {"bogus": 1}])
def test_generator_parameter_errors(params):
    with pytest.raises(ParameterError):
        GeneratorSpec("block-stochastic", params)


def test_weight_rules():
    assert WeightRule.parse("uniform:0,0.4") == WeightRule.uniform(0, 0.4)
    assert WeightRule.parse("constant:0.05") == WeightRule.constant(0.05)
    with pytest.raises(ParameterError):
        WeightRule.parse("gaussian:1")
    with pytest.raises(ParameterError):
        WeightRule.uniform(0.5, 1.2)
    assert default_weight_rule("block-stochastic") == WeightRule.constant(0.05)
    assert default_weight_rule("real-world") == WeightRule.uniform(0, 0.2)
    assert default_weight_rule("barabasi-albert") == WeightRule.uniform(0, 0.4)
    spec = GeneratorSpec("core-periphery", {}, WeightRule.constant(0.05), 4)
    assert GeneratorSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_singleton_communities():
    g = DirectedWeightedGraph.from_arcs(5, [])
    c = generate_communities(g, "singleton")
    assert c.communities == tuple((v,) for v in range(5))


def test_bfs_one_community_is_everything():
    g = generate_graph(GeneratorSpec("barabasi-albert", {"n": 30}, seed=1))
    c = generate_communities(g, CommunityRule("bfs", m=1), seed=5)
    assert c.communities == (tuple(range(30)),)


@pytest.mark.parametrize("m", [2, 3, 7])
def test_bfs_partition_sizes(m):
    g = generate_graph(GeneratorSpec("barabasi-albert", {"n": 50}, seed=2))
    c = generate_communities(g, f"bfs:{m}", seed=9)
    assert c.m == m
    assert all(s == 50 // m for s in c.sizes)
    members = [v for comm in c for v in comm]
    assert len(members) == len(set(members))


def test_bfs_communities_grow_along_arcs():
    # a directed path: every community after its source is a contiguous run
    g = DirectedWeightedGraph.from_arcs(6, [(i, i + 1, 0.1) for i in range(5)])
    c = generate_communities(g, "bfs:2", seed=0)
    for comm in c:
        assert len(comm) == 3


def test_random_imbalanced_sizes():
    g = DirectedWeightedGraph.from_arcs(200, [])
    sizes = imbalanced_sizes(200)
    assert sizes == (80, 60, 40, 20)
    c = generate_communities(g, CommunityRule("random-imbalanced", sizes=sizes), seed=3)
    assert sorted(c.sizes.tolist(), reverse=True) == [80, 60, 40, 20]
    with pytest.raises(ParameterError):
        generate_communities(g, CommunityRule("random-imbalanced", sizes=(150, 60)))
    with pytest.raises(ParameterError):
        generate_communities(DirectedWeightedGraph.from_arcs(3, []), "bfs:4")


def test_load_edge_list_undirected(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("0 1\n1 2\n")
    g = load_edge_list(p, undirected=True, weights=WeightRule.constant(0.2))
    assert g.n == 3 and g.num_arcs == 4
    assert np.all(g.weight == 0.2)


def test_load_edge_list_remaps_and_comments(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("# comment\n5 9\n")
    g = load_edge_list(p)
    assert g.n == 2 and g.labels == (5, 9)
    assert [(u, v) for u, v, _ in g.arcs()] == [(0, 1)]


def test_load_edge_list_weights_duplicates_and_loops(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("1 2 0.3\n2 2 0.5\n1 2 0.9\n2 1 0.7\n")
    g = load_edge_list(p)
    assert g.arcs() == [(0, 1, 0.3), (1, 0, 0.7)]
    p.write_text("1 2 0.3\n2 1 0.7\n")
    assert load_edge_list(p, undirected=True).arcs() == [(0, 1, 0.3), (1, 0, 0.3)]


@pytest.mark.parametrize("text,line", [("0 1\nfoo bar\n", 2), ("0 1 2 3\n", 1), ("0 1 1.5\n", 1)])
def test_load_edge_list_parse_errors(tmp_path, text, line):
    p = tmp_path / "e.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as exc:
        load_edge_list(p)
    assert exc.value.line == line
    assert f":{line}:" in str(exc.value)


def test_load_edge_list_lwcc(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("0 1\n1 2\n10 11\n")
    g = load_edge_list(p, lwcc=True)
    assert g.n == 3 and g.labels == (0, 1, 2)


def test_load_communities(tmp_path):
    g = DirectedWeightedGraph.from_arcs(3, [])
    p = tmp_path / "c.txt"
    p.write_text("0 0\n0 1\n1 2\n")
    assert load_communities(p, g).communities == ((0, 1), (2,))
    p.write_text("7 0\n7 1\n7 2\n")
    assert load_communities(p, g).m == 1
    p.write_text("0 5\n")
    with pytest.raises(ParseError):
        load_communities(p, g)
    p.write_text("0 1\n2 1\n")
    assert load_communities(p, g, order="node-first").communities == ((0, 2),)


def test_load_communities_uses_labels(tmp_path):
    e = tmp_path / "e.txt"
    e.write_text("5 9\n9 12\n")
    g = load_edge_list(e)
    c = tmp_path / "c.txt"
    c.write_text("1 9\n1 12\n")
    assert load_communities(c, g).communities == ((1, 2),)


def test_json_round_trip(tmp_path, rng):
    from conftest import random_graph

    g = random_graph(rng, 5, 10)
    comms = CommunityStructure(5, ((0, 1), (2, 3, 4)))
    g2, c2 = graph_from_json(json.loads(json.dumps(graph_to_json(g, comms))))
    assert g2.arcs() == g.arcs() and c2.communities == comms.communities
    save_instance(tmp_path / "i.json", g, comms)
    g3, c3 = load_instance(tmp_path / "i.json")
    assert g3.arcs() == g.arcs()
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ParseError):
        load_instance(tmp_path / "bad.json")


def test_rebuild_round_trip():
    g = generate_graph(GeneratorSpec("block-stochastic", {"sizes": [10, 10]}, seed=8))
    r = rebuild(g)
    for name in ("src", "dst", "weight", "out_ptr", "out_arcs", "in_ptr", "in_arcs"):
        assert np.array_equal(getattr(g, name), getattr(r, name))
