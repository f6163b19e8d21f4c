import json
import math

import numpy as np
import pytest

from _oracles import adjacency, bfs_distance, floyd_warshall, random_graph
from emodas.errors import InputDataError, TokenLookupError
from emodas.semnet import (
    UNREACHABLE,
    AssociationTriple,
    SemanticNetwork,
    build_network,
    closeness,
    degree,
    largest_component,
    load_network,
    normalize_token,
    read_edge_list,
    save_network,
    shortest_path_length,
    sum_distance_to_target,
)


def chain(*words):
    return SemanticNetwork(words, list(zip(words, words[1:])))


def test_normalize_token_casefolds_and_strips():
    assert normalize_token("  Happy\t") == "happy"
    assert normalize_token("STRASSE") == "strasse"


class TestBuildNetwork:
    def test_keeps_edge_when_one_direction_reaches_min_count(self):
        triples = [AssociationTriple("a", "b", 2), AssociationTriple("c", "a", 1)]
        net = build_network(triples, min_count=2)
        assert sorted(net.nodes) == ["a", "b"]
        assert net.edge_count == 1

    def test_aggregates_repeated_rows_per_direction(self):
        triples = [
            AssociationTriple("calm", "peace", 1),
            AssociationTriple("calm", "peace", 1),
        ]
        net = build_network(triples, min_count=2)
        assert net.edge_count == 1

    def test_opposite_directions_do_not_pool(self):
        # one response each way is two counts of 1, not one count of 2
        triples = [
            AssociationTriple("grief", "loss", 1),
            AssociationTriple("loss", "grief", 1),
        ]
        net = build_network(triples, min_count=2)
        assert len(net) == 0

    def test_parallel_edges_collapse(self):
        triples = [
            AssociationTriple("a", "b", 5),
            AssociationTriple("b", "a", 7),
        ]
        net = build_network(triples, min_count=2)
        assert net.edge_count == 1
        assert net.neighbors("a") == ("b",)

    def test_self_associations_dropped(self):
        triples = [
            AssociationTriple("a", "a", 9),
            AssociationTriple("a", "b", 3),
        ]
        net = build_network(triples, min_count=2)
        assert net.edges() == [("a", "b")]

    def test_tokens_normalized_before_counting(self):
        triples = [
            AssociationTriple("Dog", "CAT", 1),
            AssociationTriple("dog", "cat", 1),
        ]
        net = build_network(triples, min_count=2)
        assert sorted(net.nodes) == ["cat", "dog"]


class TestDistances:
    def test_distances_vector_matches_hand_graph(self):
        net = chain("a", "b", "c", "d")
        d = net.distances_from("a")
        assert d.dtype == np.int32
        by_word = {w: int(d[i]) for i, w in enumerate(net.nodes)}
        assert by_word == {"a": 0, "b": 1, "c": 2, "d": 3}

    def test_unreachable_encoded_as_minus_one_in_vector(self):
        net = SemanticNetwork(["a", "b", "c"], [("a", "b")])
        d = net.distances_from("c")
        by_word = {w: int(d[i]) for i, w in enumerate(net.nodes)}
        assert by_word["a"] == -1 and by_word["b"] == -1 and by_word["c"] == 0

    def test_shortest_path_length_unreachable_is_inf(self):
        net = SemanticNetwork(["a", "b"], [])
        assert shortest_path_length(net, "a", "b") == UNREACHABLE
        assert math.isinf(shortest_path_length(net, "a", "b"))

    def test_shortest_path_length_identity_is_zero(self):
        net = chain("a", "b")
        assert shortest_path_length(net, "a", "a") == 0

    def test_unknown_word_raises(self):
        net = chain("a", "b")
        with pytest.raises(TokenLookupError):
            net.distances_from("zzz")
        with pytest.raises(TokenLookupError):
            shortest_path_length(net, "a", "zzz")

    def test_matches_floyd_warshall_on_random_graphs(self):
        # smaller copy of the acceptance oracle, kept here so unit runs
        # catch BFS regressions without the full sweep
        rng = np.random.default_rng(7)
        for _ in range(15):
            names, edges = random_graph(rng, max_nodes=12)
            net = SemanticNetwork(names, [(names[i], names[j]) for i, j in edges])
            ref = floyd_warshall(len(names), edges)
            for i, src in enumerate(names):
                d = net.distances_from(src)
                for j in range(len(names)):
                    expect = ref[i, j]
                    got = int(d[j])
                    if math.isinf(expect):
                        assert got == -1
                    else:
                        assert got == int(expect)


class TestMetrics:
    def test_degree(self):
        net = SemanticNetwork(["a", "b", "c"], [("a", "b"), ("a", "c")])
        assert degree(net, "a") == 2
        assert degree(net, "b") == 1

    def test_closeness_star_center(self):
        # star on 4 nodes: center sums to 3, leaves sum to 5
        net = SemanticNetwork(["c", "x", "y", "z"], [("c", "x"), ("c", "y"), ("c", "z")])
        assert closeness(net, "c") == pytest.approx(3 / 3)
        assert closeness(net, "x") == pytest.approx(3 / 5)

    def test_closeness_ignores_other_components(self):
        net = SemanticNetwork(["a", "b", "q", "r"], [("a", "b"), ("q", "r")])
        assert closeness(net, "a") == pytest.approx(1.0)

    def test_sum_distance_to_target(self):
        net = chain("a", "b", "c")
        total, unreachable = sum_distance_to_target(net, ["a", "b", "c"], "c")
        assert total == 2 + 1 + 0
        assert unreachable == 0

    def test_sum_distance_counts_unreachable(self):
        net = SemanticNetwork(["a", "b", "t"], [("a", "t")])
        total, unreachable = sum_distance_to_target(net, ["a", "b"], "t")
        assert total == 1
        assert unreachable == 1


class TestLargestComponent:
    def test_picks_biggest(self):
        net = SemanticNetwork(
            ["a", "b", "c", "x", "y"], [("a", "b"), ("b", "c"), ("x", "y")]
        )
        sub = largest_component(net)
        assert sorted(sub.nodes) == ["a", "b", "c"]
        assert sub.edge_count == 2

    def test_tie_breaks_on_smallest_node_name(self):
        net = SemanticNetwork(["m", "n", "a", "b"], [("m", "n"), ("a", "b")])
        sub = largest_component(net)
        assert sorted(sub.nodes) == ["a", "b"]

    def test_empty_network(self):
        net = SemanticNetwork([], [])
        assert len(largest_component(net)) == 0


class TestEdgeListIo:
    def test_read_edge_list(self, tmp_path):
        p = tmp_path / "edges.tsv"
        p.write_text("# comment\ncue\tresponse\tcount\na\tb\t3\nb\tc\t2\n")
        triples = read_edge_list(str(p))
        assert triples == [
            AssociationTriple("a", "b", 3),
            AssociationTriple("b", "c", 2),
        ]

    def test_read_edge_list_rejects_bad_count(self, tmp_path):
        p = tmp_path / "edges.tsv"
        p.write_text("a\tb\t3\na\tb\tmany\n")
        with pytest.raises(InputDataError) as exc:
            read_edge_list(str(p))
        assert "edges.tsv:2" in str(exc.value)

    def test_read_edge_list_skips_header_row(self, tmp_path):
        p = tmp_path / "edges.tsv"
        p.write_text("cue\tresponse\tcount\na\tb\t3\n")
        assert read_edge_list(str(p)) == [AssociationTriple("a", "b", 3)]

    def test_read_edge_list_rejects_short_row(self, tmp_path):
        p = tmp_path / "edges.tsv"
        p.write_text("a\tb\n")
        with pytest.raises(InputDataError):
            read_edge_list(str(p))

    def test_save_load_round_trip(self, tmp_path):
        net = build_network(
            [AssociationTriple("a", "b", 2), AssociationTriple("b", "c", 4)]
        )
        p = tmp_path / "net.json"
        save_network(net, str(p))
        loaded = load_network(str(p))
        assert loaded.nodes == net.nodes
        assert loaded.edges() == net.edges()

    def test_saved_file_is_versioned_json(self, tmp_path):
        net = build_network([AssociationTriple("a", "b", 2)])
        p = tmp_path / "net.json"
        save_network(net, str(p))
        doc = json.loads(p.read_text())
        assert doc["format"] == "emodas.semnet"
        assert doc["version"] == 1

    def test_load_rejects_wrong_format(self, tmp_path):
        p = tmp_path / "net.json"
        p.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(InputDataError):
            load_network(str(p))


def test_toy_network_shape(toy_net):
    # fixed by the bundled edges.tsv: one sub-threshold pair, one pair that
    # only reaches the threshold after aggregation, one per-direction split
    assert len(toy_net) == 17
    assert toy_net.edge_count == 20
    assert "sunshine" not in toy_net
    assert shortest_path_length(toy_net, "calm", "peace") == 1


def test_toy_network_bfs_agrees_with_reference(toy_net):
    adj = adjacency(toy_net)
    for src in ("happy", "depression", "fear"):
        d = toy_net.distances_from(src)
        for j, dst in enumerate(toy_net.nodes):
            ref = bfs_distance(adj, src, dst)
            assert (int(d[j]) == -1) == math.isinf(ref)
            if not math.isinf(ref):
                assert int(d[j]) == int(ref)
