import itertools
import math

import numpy as np

from privdist.graphs import WeightedGraph


def tree_from_parents(parents, weights=None, kind="tree"):
    """Rooted tree from a parent list for vertices 1..n-1 (root 0)."""
    n = len(parents) + 1
    if weights is None:
        weights = [1.0] * (n - 1)
    edges = [(int(p), i + 1, float(w)) for i, (p, w) in enumerate(zip(parents, weights))]
    return WeightedGraph(kind, n, edges, root=0)


def enumerate_parent_trees(max_vertices):
    """All rooted trees on <= max_vertices vertices with increasing labels.

    Every rooted tree shape occurs (BFS numbering makes labels increasing),
    and many labelings of each shape exercise the tie-breaking rules.
    """
    yield tree_from_parents([])
    for n in range(2, max_vertices + 1):
        for parents in itertools.product(*(range(i) for i in range(1, n))):
            yield tree_from_parents(list(parents))


def naive_lca(graph, s, t):
    parent, depth, _ = graph.tree_arrays
    while depth[s] > depth[t]:
        s = int(parent[s])
    while depth[t] > depth[s]:
        t = int(parent[t])
    while s != t:
        s, t = int(parent[s]), int(parent[t])
    return s


def assert_decomposition_invariants(tree, decomp):
    v = tree.vertex_count
    # heavy paths and light edges partition the edge set
    covered = []
    for path in decomp.paths:
        covered.extend(
            (min(a, b), max(a, b)) for a, b in zip(path, path[1:]))
    heavy_set = set(covered)
    assert len(heavy_set) == len(covered), "heavy paths share an edge"
    light_set = {(min(u, w), max(u, w)) for u, w in decomp.light_edges}
    assert not heavy_set & light_set, "edge is both heavy and light"
    all_edges = {(int(a), int(b)) for a, b in zip(tree.edge_u, tree.edge_v)}
    assert heavy_set | light_set == all_edges, "edge not covered"
    # every vertex on exactly one path, position consistent
    seen = set()
    for pid, path in enumerate(decomp.paths):
        for pos, u in enumerate(path):
            assert u not in seen
            seen.add(u)
            assert decomp.path_of[u] == pid
            assert decomp.pos_of[u] == pos
    assert len(seen) == v
    # heights strictly descend by 1 along each path and end at a leaf
    for path in decomp.paths:
        for a, b in zip(path, path[1:]):
            assert decomp.height[b] == decomp.height[a] - 1
        assert decomp.height[path[-1]] == 0
    # root-to-leaf light-edge bound
    parent, depth, _ = tree.tree_arrays
    light_above = np.zeros(v, dtype=np.int64)
    for u in np.argsort(depth, kind="stable"):
        p = int(parent[u])
        if p >= 0:
            is_light = (min(p, u), max(p, u)) in light_set
            light_above[u] = light_above[p] + int(is_light)
    if v >= 2:
        assert light_above.max() <= math.ceil(math.log2(v))
