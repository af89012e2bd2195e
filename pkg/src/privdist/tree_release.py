"""Private all-pairs tree distances via heavy-path decomposition.

The tree's edges are partitioned into edge-disjoint heavy paths plus light
edges. At each vertex the heavy path continues into the child whose subtree
is tallest (ties to the smallest child id); every other child edge is light
and its subtree is decomposed recursively, so each heavy path runs from a
subtree root down to a leaf. Any root-to-leaf walk crosses at most
ceil(log2 V) light edges.

Heavy paths and light edges are pairwise edge-disjoint, so each heavy path
gets its own epsilon-DP dyadic sketch and each light edge its own
Laplace(1/epsilon) noisy weight at full budget; the combined release is
epsilon-DP. Distance queries walk the unique s-t tree path by heavy-path
jumps toward the lowest common ancestor and sum released values only.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dp import LaplaceNoiseSource, NoiseLedger, PrivacyParams, add_noise
from .graphs import WeightedGraph
from .path_release import (
    PathReleaseSketch,
    build_path_sketch,
    exact_interval_sums,
    num_levels,
    query_path,
)


@dataclass
class HeavyPathDecomposition:
    """Edge-disjoint heavy paths plus the leftover light edges.

    `depth` counts edges from the root (root 0); `height` counts edges down
    to the deepest leaf (leaves 0). Along every heavy path the height drops
    by exactly 1 per step, and the tail is a leaf. Light edges are stored as
    (parent, child) vertex pairs; the child heads its own heavy path.
    """

    paths: list[list[int]]
    light_edges: list[tuple[int, int]]
    path_of: np.ndarray
    pos_of: np.ndarray
    parent: np.ndarray
    depth: np.ndarray
    height: np.ndarray
    head_parent: np.ndarray   # parent vertex of each path's head, -1 for root path
    head_depth: np.ndarray    # root-depth of each path's head

    @property
    def tree_depth(self) -> int:
        return int(self.height[self.paths[0][0]])

    @property
    def vertex_count(self) -> int:
        return int(self.path_of.size)

    @property
    def root(self) -> int:
        return self.paths[0][0]


def decompose(tree: WeightedGraph) -> HeavyPathDecomposition:
    """Heavy-path decomposition of a rooted tree (or path)."""
    if tree.kind not in ("path", "tree"):
        raise ValueError(f"decompose requires a tree, got kind={tree.kind!r}")
    parent, depth, _ = tree.tree_arrays
    v = tree.vertex_count

    children: list[list[int]] = [[] for _ in range(v)]
    for u in range(v):
        p = parent[u]
        if p >= 0:
            children[p].append(u)

    order = np.argsort(depth, kind="stable")
    height = np.zeros(v, dtype=np.int64)
    for u in order[::-1]:
        if children[u]:
            height[u] = 1 + max(height[c] for c in children[u])

    paths: list[list[int]] = []
    path_of = np.full(v, -1, dtype=np.int64)
    pos_of = np.zeros(v, dtype=np.int64)
    head_parent = []
    light_edges = []

    queue = deque([tree.root])
    while queue:
        head = queue.popleft()
        pid = len(paths)
        path = [head]
        path_of[head] = pid
        cur = head
        while children[cur]:
            heavy = children[cur][0]
            for c in children[cur][1:]:
                if height[c] > height[heavy]:
                    heavy = c
            for c in children[cur]:
                if c != heavy:
                    queue.append(c)
            path.append(heavy)
            path_of[heavy] = pid
            pos_of[heavy] = len(path) - 1
            cur = heavy
        paths.append(path)
        hp = int(parent[head])
        head_parent.append(hp)
        if hp >= 0:
            light_edges.append((hp, head))

    heads = np.asarray([p[0] for p in paths], dtype=np.int64)
    return HeavyPathDecomposition(
        paths=paths,
        light_edges=light_edges,
        path_of=path_of,
        pos_of=pos_of,
        parent=parent,
        depth=depth,
        height=height,
        head_parent=np.asarray(head_parent, dtype=np.int64),
        head_depth=depth[heads],
    )


def lca(decomposition: HeavyPathDecomposition, s: int, t: int) -> int:
    """Lowest common ancestor via heavy-path jumps (O(log V) path hops)."""
    d = decomposition
    if not 0 <= s < d.vertex_count or not 0 <= t < d.vertex_count:
        raise ValueError(f"vertex id out of range: {(s, t)}")
    while d.path_of[s] != d.path_of[t]:
        ps, pt = d.path_of[s], d.path_of[t]
        if d.head_depth[ps] >= d.head_depth[pt]:
            s = int(d.head_parent[ps])
        else:
            t = int(d.head_parent[pt])
    return s if d.depth[s] <= d.depth[t] else t


@dataclass
class _FlatTreeSketch:
    """Array form of a tree sketch consumed by the bulk-query kernel."""

    path_of: np.ndarray
    pos_of: np.ndarray
    head_parent: np.ndarray
    head_depth: np.ndarray
    light_val: np.ndarray
    path_len: np.ndarray
    path_levels: np.ndarray
    lvl_off: np.ndarray
    max_levels: int
    sums: np.ndarray


@dataclass
class TreeReleaseSketch:
    """Released tree mechanism: path sketches plus noisy light-edge weights."""

    decomposition: HeavyPathDecomposition
    path_sketches: list[PathReleaseSketch]
    light_edge_noisy: dict[tuple[int, int], float]
    light_scale: float
    epsilon: float
    seed: int
    vertex_count: int
    ledger: NoiseLedger
    clamp_nonnegative: bool = False
    _flat: _FlatTreeSketch | None = field(default=None, repr=False)

    mechanism = "tree"

    def light_value_of_path(self, pid: int) -> float:
        d = self.decomposition
        hp = int(d.head_parent[pid])
        return self.light_edge_noisy[(hp, d.paths[pid][0])]

    def flatten(self) -> _FlatTreeSketch:
        if self._flat is not None:
            return self._flat
        d = self.decomposition
        n_paths = len(d.paths)
        path_len = np.asarray([s.edge_count for s in self.path_sketches], dtype=np.int64)
        path_levels = np.asarray([s.levels for s in self.path_sketches], dtype=np.int64)
        max_levels = int(path_levels.max()) if n_paths else 0
        lvl_off = np.zeros(n_paths * (max_levels + 1), dtype=np.int64)
        light_val = np.full(n_paths, np.nan)
        chunks = []
        offset = 0
        for pid, sk in enumerate(self.path_sketches):
            if d.head_parent[pid] >= 0:
                light_val[pid] = self.light_value_of_path(pid)
            for lvl, level_sums in enumerate(sk.noisy_interval_sums):
                lvl_off[pid * (max_levels + 1) + lvl] = offset
                chunks.append(level_sums)
                offset += level_sums.size
        sums = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.float64)
        self._flat = _FlatTreeSketch(
            path_of=d.path_of,
            pos_of=d.pos_of,
            head_parent=d.head_parent,
            head_depth=d.head_depth,
            light_val=light_val,
            path_len=path_len,
            path_levels=path_levels,
            lvl_off=lvl_off,
            max_levels=max_levels,
            sums=sums,
        )
        return self._flat


def build_tree_sketch(
    tree: WeightedGraph,
    params: PrivacyParams,
    seed: int,
    scale_override: float | None = None,
    decomposition: HeavyPathDecomposition | None = None,
) -> TreeReleaseSketch:
    """Build the epsilon-DP tree release.

    Each heavy path gets an independent dyadic sketch at the full epsilon;
    each light edge gets its weight plus Laplace(1/epsilon). Deterministic
    for a fixed seed: paths are noised in id order, then light edges in
    path-id order, from one sequential stream.
    """
    decomp = decompose(tree) if decomposition is None else decomposition
    source = LaplaceNoiseSource(seed)
    ledger = NoiseLedger()
    sketches = []
    for pid, path in enumerate(decomp.paths):
        if len(path) == 1:
            sketches.append(PathReleaseSketch.empty(seed=source.seed))
            continue
        w = [tree.weights[tree.edge_index(path[i], path[i + 1])]
             for i in range(len(path) - 1)]
        sketches.append(build_path_sketch(
            w, params.epsilon, source, ledger,
            label=f"path-{pid}", scale_override=scale_override))
    light_scale = 1.0 / params.epsilon if scale_override is None else float(scale_override)
    light_noisy: dict[tuple[int, int], float] = {}
    for hp, head in decomp.light_edges:
        weight = float(tree.weights[tree.edge_index(hp, head)])
        light_noisy[(hp, head)] = add_noise(
            weight, light_scale, source, ledger, "light-edge")
    return TreeReleaseSketch(
        decomposition=decomp,
        path_sketches=sketches,
        light_edge_noisy=light_noisy,
        light_scale=light_scale,
        epsilon=params.epsilon,
        seed=seed,
        vertex_count=tree.vertex_count,
        ledger=ledger,
    )


def query_tree(sketch: TreeReleaseSketch, s: int, t: int) -> tuple[float, int]:
    """Released s-t distance and the number of noise terms it aggregates."""
    d = sketch.decomposition
    if not 0 <= s < sketch.vertex_count or not 0 <= t < sketch.vertex_count:
        raise ValueError(f"vertex id out of range: {(s, t)}")
    total = 0.0
    terms = 0
    while d.path_of[s] != d.path_of[t]:
        ps, pt = int(d.path_of[s]), int(d.path_of[t])
        if d.head_depth[ps] >= d.head_depth[pt]:
            value, k = query_path(sketch.path_sketches[ps], 0, int(d.pos_of[s]))
            total += value
            terms += k
            total += sketch.light_value_of_path(ps)
            terms += 1
            s = int(d.head_parent[ps])
        else:
            value, k = query_path(sketch.path_sketches[pt], 0, int(d.pos_of[t]))
            total += value
            terms += k
            total += sketch.light_value_of_path(pt)
            terms += 1
            t = int(d.head_parent[pt])
    value, k = query_path(
        sketch.path_sketches[int(d.path_of[s])], int(d.pos_of[s]), int(d.pos_of[t]))
    total += value
    terms += k
    return total, terms


def query_tree_pairs(sketch: TreeReleaseSketch, src, dst) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized query_tree over pair arrays (kernel-backed when available)."""
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    if src.size and (min(src.min(), dst.min()) < 0
                     or max(src.max(), dst.max()) >= sketch.vertex_count):
        raise ValueError("vertex id out of range in pair batch")
    if _kernels.BACKEND == "numba":
        return _kernels.query_tree_pairs_numba(sketch.flatten(), src, dst)
    values = np.empty(src.size, dtype=np.float64)
    terms = np.empty(src.size, dtype=np.int64)
    for i in range(src.size):
        values[i], terms[i] = query_tree(sketch, int(src[i]), int(dst[i]))
    return values, terms


def statistic_vector(
    decomposition: HeavyPathDecomposition, tree: WeightedGraph, weights=None
) -> np.ndarray:
    """Pre-noise release statistic: all interval sums, then light weights.

    This is the vector the Laplace mechanism perturbs; sensitivity audits
    difference it across neighboring weight functions.
    """
    w = tree.weights if weights is None else np.asarray(weights, dtype=np.float64)
    parts = []
    for path in decomposition.paths:
        if len(path) == 1:
            continue
        pw = np.asarray([w[tree.edge_index(path[i], path[i + 1])]
                         for i in range(len(path) - 1)])
        parts.extend(exact_interval_sums(pw))
    if decomposition.light_edges:
        ids = [tree.edge_index(u, v) for u, v in decomposition.light_edges]
        parts.append(w[np.asarray(ids, dtype=np.int64)])
    if not parts:
        return np.empty(0, dtype=np.float64)
    return np.concatenate(parts)


def statistic_sensitivity_bound(decomposition: HeavyPathDecomposition) -> float:
    """Claimed L1 sensitivity of the pre-noise statistic under unit-L1 shifts.

    Components are edge-disjoint, so a unit shift on one edge touches either
    one path sketch (<= its level count) or one light edge (1).
    """
    bounds = [1.0] if decomposition.light_edges else []
    for path in decomposition.paths:
        if len(path) > 1:
            bounds.append(float(num_levels(len(path) - 1)))
    return max(bounds) if bounds else 0.0


def query_term_bound(vertex_count: int, tree_depth: int) -> int:
    """Instrumented ceiling on noise terms per released tree distance."""
    log_v = math.ceil(math.log2(max(vertex_count, 2)))
    log_h = math.ceil(math.log2(max(tree_depth, 1)))
    return 2 * (log_h + 1) * log_v + log_v
