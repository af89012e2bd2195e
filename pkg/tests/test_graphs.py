import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privdist import graphs
from privdist.graphs import (
    ResourceLimitError,
    WeightedGraph,
    check_distance_matrix,
    exact_all_pairs,
    exact_distance,
    generate_graph,
)


def test_smallest_path():
    g = generate_graph("path", "const:1", seed=0, nodes=2)
    assert g.vertex_count == 2
    assert g.edge_count == 1
    assert g.weights[0] == 1.0


def test_grid_lattice_edge_count():
    g = generate_graph("grid", "const:1", seed=0, side=4)
    assert g.vertex_count == 16
    assert g.edge_count == 2 * 4 * 3


def test_balanced_tree_structure():
    g = generate_graph("balanced-tree", "uniform:0,1", seed=7, depth=3)
    assert g.vertex_count == 15
    assert g.edge_count == 14
    _, depth, _ = g.tree_arrays
    assert depth.max() == 3


def test_random_tree_respects_depth_cap():
    for seed in range(5):
        g = generate_graph("random-tree", "const:1", seed=seed, nodes=200, depth=6)
        _, depth, _ = g.tree_arrays
        assert depth.max() <= 6
        assert g.vertex_count == 200


def test_generator_deterministic():
    a = generate_graph("random-tree", "uniform:0,5", seed=11, nodes=64, depth=8)
    b = generate_graph("random-tree", "uniform:0,5", seed=11, nodes=64, depth=8)
    assert np.array_equal(a.edge_u, b.edge_u)
    assert np.array_equal(a.edge_v, b.edge_v)
    assert np.array_equal(a.weights, b.weights)
    c = generate_graph("random-tree", "uniform:0,5", seed=12, nodes=64, depth=8)
    assert not (np.array_equal(a.edge_u, c.edge_u)
                and np.array_equal(a.weights, c.weights))


@pytest.mark.parametrize("family,kwargs", [
    ("grid", {"side": 0}),
    ("path", {"nodes": 0}),
    ("random-tree", {"nodes": 10}),      # missing depth
    ("bogus", {"nodes": 3}),
])
def test_generator_rejects_bad_params(family, kwargs):
    with pytest.raises(ValueError):
        generate_graph(family, "const:1", seed=0, **kwargs)


def test_weight_spec_validation():
    with pytest.raises(ValueError):
        generate_graph("path", "uniform:3,1", seed=0, nodes=4)
    with pytest.raises(ValueError):
        generate_graph("path", "uniform:-1,1", seed=0, nodes=4)
    with pytest.raises(ValueError):
        generate_graph("path", "triangular:1", seed=0, nodes=4)


def test_graph_invariants_rejected():
    with pytest.raises(ValueError):
        WeightedGraph("general", 3, [(0, 1, 1.0)])  # disconnected
    with pytest.raises(ValueError):
        WeightedGraph("general", 2, [(0, 0, 1.0)])  # self loop
    with pytest.raises(ValueError):
        WeightedGraph("general", 2, [(0, 1, 1.0), (1, 0, 2.0)])  # duplicate
    with pytest.raises(ValueError):
        WeightedGraph("general", 2, [(0, 1, -1.0)])  # negative weight
    with pytest.raises(ValueError):
        WeightedGraph("tree", 3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], root=0)
    with pytest.raises(ValueError):
        WeightedGraph("grid", 4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], grid_side=2)


def test_exact_distance_trivial_cases():
    g = WeightedGraph("path", 2, [(0, 1, 3.5)], root=0)
    assert exact_distance(g, 0, 0) == 0.0
    assert exact_distance(g, 0, 1) == 3.5


def test_exact_distance_unit_grid_is_manhattan():
    g = generate_graph("grid", "const:1", seed=0, side=4)
    assert exact_distance(g, 0, 15) == pytest.approx(6.0, abs=1e-9)
    m = exact_all_pairs(g)
    for s in range(16):
        for t in range(16):
            manhattan = abs(s // 4 - t // 4) + abs(s % 4 - t % 4)
            assert m[s, t] == pytest.approx(manhattan, abs=1e-9)


def test_all_pairs_chain_sum():
    g = WeightedGraph("path", 3, [(0, 1, 1.0), (1, 2, 2.0)], root=0)
    m = exact_all_pairs(g)
    assert m[0, 2] == pytest.approx(3.0, abs=1e-12)
    assert np.all(np.diagonal(m) == 0)


def test_oracles_cross_check_on_random_grid():
    g = generate_graph("grid", "uniform:0,1", seed=9, side=6)
    m = exact_all_pairs(g)
    rng = np.random.default_rng(1)
    for _ in range(50):
        s, t = rng.integers(0, 36, size=2)
        assert exact_distance(g, int(s), int(t)) == pytest.approx(
            m[s, t], abs=1e-9)


def test_all_pairs_matrix_invariants():
    for seed, fam, kw in [(0, "grid", {"side": 5}),
                          (1, "random-tree", {"nodes": 40, "depth": 6})]:
        g = generate_graph(fam, "uniform:0,2", seed=seed, **kw)
        check_distance_matrix(exact_all_pairs(g))


def test_all_pairs_size_guard():
    g = generate_graph("path", "const:1", seed=0, nodes=20)
    with pytest.raises(ResourceLimitError):
        exact_all_pairs(g, limit=10)


def test_graph_file_round_trip_and_rejects():
    g = generate_graph("grid", "uniform:0,3", seed=4, side=3)
    text = graphs.dump_graph(g)
    g2 = graphs.parse_graph(text)
    assert graphs.dump_graph(g2) == text
    assert text.startswith("# privdist-graph v1 kind=grid V=9 side=3")
    with pytest.raises(ValueError):
        graphs.parse_graph("# wrong-magic v1 kind=path V=2\n0 1 1.0\n")
    with pytest.raises(ValueError):
        graphs.parse_graph("# privdist-graph v1 kind=path V=2 root=0\n0 1 -3.0\n")
    with pytest.raises(ValueError):
        graphs.parse_graph("# privdist-graph v1 kind=mystery V=2 root=0\n0 1 1.0\n")


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=40), st.integers(min_value=0, max_value=2**31))
def test_tree_walk_matches_matrix(nodes, seed):
    g = generate_graph("random-tree", "uniform:0,1", seed=seed, nodes=nodes,
                       depth=max(1, nodes // 3))
    m = exact_all_pairs(g)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        s, t = rng.integers(0, nodes, size=2)
        assert exact_distance(g, int(s), int(t)) == pytest.approx(m[s, t], abs=1e-9)
