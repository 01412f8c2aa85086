import random
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbnopt.topology import (
    NetworkTopology,
    TopologyError,
    load_topology,
    route_uses_link,
    yen_k_shortest,
)

from conftest import random_topology


def enumerate_simple_paths(topology, s, d):
    """Brute-force oracle: every simple path with its span cost."""
    out = []

    def walk(node, seq, cost):
        if node == d:
            out.append((cost, tuple(seq)))
            return
        for nbr in topology.neighbors(node):
            if nbr not in seq:
                walk(nbr, seq + [nbr], cost + topology.spans(node, nbr))

    walk(s, [s], 0)
    return sorted(out)


class TestLoadTopology:
    def test_dt9_counts(self, data_dir):
        t = load_topology(data_dir / "dt9.csv")
        assert len(t.nodes) == 9
        assert len(t.links) == 17

    def test_dt14_counts(self, data_dir):
        t = load_topology(data_dir / "dt14.csv")
        assert len(t.nodes) == 14
        assert len(t.links) == 23

    def test_json_matches_csv(self, data_dir):
        csv_t = load_topology(data_dir / "dt9.csv")
        json_t = load_topology(data_dir / "dt9.json")
        assert set(csv_t.nodes) == set(json_t.nodes)
        assert csv_t.span_count == json_t.span_count

    def test_self_loop_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u,v,spans\na,a,3\n")
        with pytest.raises(TopologyError, match="self-loop"):
            load_topology(path)

    def test_duplicate_link_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u,v,spans\na,b,3\nb,a,2\n")
        with pytest.raises(TopologyError, match="duplicate"):
            load_topology(path)

    def test_nonpositive_spans_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u,v,spans\na,b,0\n")
        with pytest.raises(TopologyError):
            load_topology(path)

    def test_disconnected_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u,v,spans\na,b,1\nc,d,1\n")
        with pytest.raises(TopologyError, match="connected"):
            load_topology(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("from,to,count\na,b,1\n")
        with pytest.raises(TopologyError, match="header"):
            load_topology(path)


class TestYen:
    def test_four_node_example(self, data_dir):
        t = load_topology(data_dir / "example4.csv")
        routes = yen_k_shortest(t, "1", "4", 3)
        assert [r.node_sequence for r in routes] == [
            ("1", "4"),
            ("1", "3", "4"),
            ("1", "2", "4"),
        ]
        assert [r.span_total for r in routes] == [1, 2, 3]
        assert [r.route_index for r in routes] == [1, 2, 3]

    def test_path_graph_single_route(self):
        t = NetworkTopology("path", ("a", "b", "c"), {("a", "b"): 1, ("b", "c"): 1})
        routes = yen_k_shortest(t, "a", "c", 5)
        assert len(routes) == 1
        assert routes[0].node_sequence == ("a", "b", "c")

    def test_same_node_rejected(self, data_dir):
        t = load_topology(data_dir / "example4.csv")
        with pytest.raises(ValueError):
            yen_k_shortest(t, "1", "1", 2)

    def test_unknown_node_rejected(self, data_dir):
        t = load_topology(data_dir / "example4.csv")
        with pytest.raises(ValueError):
            yen_k_shortest(t, "1", "zz", 2)

    def test_matches_bruteforce_on_random_graphs(self):
        rng = random.Random(42)
        for _ in range(25):
            t = random_topology(rng, 6)
            s, d = rng.sample(t.nodes, 2)
            k = 4
            routes = yen_k_shortest(t, s, d, k)
            oracle = enumerate_simple_paths(t, s, d)
            assert len(routes) == min(k, len(oracle))
            # same multiset of costs as the k cheapest simple paths
            assert [r.span_total for r in routes] == [c for c, _ in oracle[: len(routes)]]
            # every returned route is a genuine simple path with that cost
            oracle_set = set(oracle)
            for r in routes:
                assert (r.span_total, r.node_sequence) in oracle_set

    def test_deterministic_tie_break(self):
        # two equal-cost routes: lexicographically smaller node sequence first
        t = NetworkTopology(
            "tie",
            ("a", "b", "c", "d"),
            {("a", "b"): 1, ("b", "d"): 1, ("a", "c"): 1, ("c", "d"): 1},
        )
        routes = yen_k_shortest(t, "a", "d", 2)
        assert routes[0].node_sequence == ("a", "b", "d")
        assert routes[1].node_sequence == ("a", "c", "d")

    def test_costs_nondecreasing_and_spans_consistent(self):
        rng = random.Random(7)
        for _ in range(10):
            t = random_topology(rng, 7)
            s, d = rng.sample(t.nodes, 2)
            routes = yen_k_shortest(t, s, d, 5)
            costs = [r.span_total for r in routes]
            assert costs == sorted(costs)
            for r in routes:
                assert len(set(r.node_sequence)) == len(r.node_sequence)
                assert r.span_total == sum(t.spans(a, b) for a, b in zip(r.node_sequence, r.node_sequence[1:]))


class TestRouteUsesLink:
    def test_positive_and_negative(self, data_dir):
        t = load_topology(data_dir / "example4.csv")
        route = yen_k_shortest(t, "1", "4", 3)[1]  # 1-3-4
        assert route_uses_link(route, ("1", "3"))
        assert not route_uses_link(route, ("1", "2"))

    def test_consistent_with_link_sequence(self):
        rng = random.Random(3)
        for _ in range(10):
            t = random_topology(rng, 5)
            s, d = rng.sample(t.nodes, 2)
            for route in yen_k_shortest(t, s, d, 3):
                for link in t.links:
                    assert route_uses_link(route, link) == (link in route.link_sequence)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_random_topologies_validate(seed):
    rng = random.Random(seed)
    t = random_topology(rng, rng.randint(2, 7))
    assert all(spans >= 1 for spans in t.span_count.values())
    assert len(t.pairs()) == len(t.nodes) * (len(t.nodes) - 1)
