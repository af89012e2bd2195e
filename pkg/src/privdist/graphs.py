"""Graph representations, generators, exact-distance oracles, and graph files.

Graphs are undirected and connected, with public topology and nonnegative
edge weights. Edges are stored in canonical order (u < v, sorted by (u, v));
the index of an edge in that order is its edge id, which weight functions
and perturbations refer to.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels
from .dp import derive_seed

KINDS = ("path", "tree", "grid", "general")

#: hard ceiling for dense all-pairs computation (O(V^3) / O(V^2) memory)
DEFAULT_ALL_PAIRS_LIMIT = 4096

WEIGHT_TOLERANCE = 1e-9


class ResourceLimitError(RuntimeError):
    """Raised when a request exceeds a guarded size limit."""


def _canonical_edges(edges) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    eu = np.asarray([min(u, v) for u, v, _ in edges], dtype=np.int64)
    ev = np.asarray([max(u, v) for u, v, _ in edges], dtype=np.int64)
    ew = np.asarray([w for _, _, w in edges], dtype=np.float64)
    order = np.lexsort((ev, eu))
    return eu[order], ev[order], ew[order]


class WeightedGraph:
    """Connected undirected graph with public topology and private weights."""

    def __init__(self, kind, vertex_count, edges, grid_side=None, root=None):
        if kind not in KINDS:
            raise ValueError(f"unknown graph kind {kind!r}")
        if vertex_count < 1:
            raise ValueError("vertex_count must be >= 1")
        self.kind = kind
        self.vertex_count = int(vertex_count)
        self.edge_u, self.edge_v, self.weights = _canonical_edges(edges)
        self.grid_side = None if grid_side is None else int(grid_side)
        self.root = None if root is None else int(root)
        self._validate()
        for arr in (self.edge_u, self.edge_v, self.weights):
            arr.setflags(write=False)

    # -- construction helpers ------------------------------------------------

    def with_weights(self, weights) -> "WeightedGraph":
        """Same topology, new weight vector (aligned with edge ids)."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != self.weights.shape:
            raise ValueError("weight vector length must match edge count")
        edges = list(zip(self.edge_u.tolist(), self.edge_v.tolist(), weights.tolist()))
        return WeightedGraph(self.kind, self.vertex_count,
                             edges, grid_side=self.grid_side, root=self.root)

    # -- validation ----------------------------------------------------------

    def _validate(self):
        v = self.vertex_count
        if self.edge_u.size:
            if self.edge_u.min() < 0 or self.edge_v.max() >= v:
                raise ValueError("edge endpoint out of range")
            if np.any(self.edge_u == self.edge_v):
                raise ValueError("self-loops are not allowed")
            pairs = self.edge_u * v + self.edge_v
            if np.unique(pairs).size != pairs.size:
                raise ValueError("duplicate undirected edge")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("edge weights must be finite and nonnegative")
        if not self._connected():
            raise ValueError("graph must be connected")
        if self.kind in ("path", "tree"):
            if self.root is None or not 0 <= self.root < v:
                raise ValueError(f"kind={self.kind} requires a valid root")
            if self.edge_count != v - 1:
                raise ValueError("a tree must have exactly V-1 edges")
        else:
            if self.root is not None:
                raise ValueError(f"kind={self.kind} must not carry a root")
        if self.kind == "path":
            deg = self.degrees()
            if v >= 2 and (deg.max() > 2 or deg[self.root] != 1):
                raise ValueError("kind=path requires a chain rooted at an endpoint")
        if self.kind == "grid":
            side = self.grid_side
            if side is None or side * side != v:
                raise ValueError("kind=grid requires grid_side with V = side^2")
            expected = _lattice_pairs(side)
            actual = set(zip(self.edge_u.tolist(), self.edge_v.tolist()))
            if actual != expected:
                raise ValueError("kind=grid requires exactly the 4-neighbor lattice edges")
        elif self.grid_side is not None:
            raise ValueError(f"kind={self.kind} must not carry grid_side")

    def _connected(self) -> bool:
        if self.vertex_count == 1:
            return True
        indptr, adj, _ = self.csr()
        seen = np.zeros(self.vertex_count, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for e in range(indptr[u], indptr[u + 1]):
                w = adj[e]
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        return bool(seen.all())

    # -- topology accessors --------------------------------------------------

    @property
    def edge_count(self) -> int:
        return int(self.edge_u.size)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.vertex_count, dtype=np.int64)
        np.add.at(deg, self.edge_u, 1)
        np.add.at(deg, self.edge_v, 1)
        return deg

    @cached_property
    def _edge_lookup(self) -> dict:
        return {
            (int(u), int(v)): i
            for i, (u, v) in enumerate(zip(self.edge_u, self.edge_v))
        }

    def edge_index(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        return self._edge_lookup[key]

    def csr(self, weights=None):
        """Directed CSR view (both arc directions) for the kernels."""
        if weights is None:
            if self._csr_cache is None:
                self._csr_cache = self._build_csr(self.weights)
            return self._csr_cache
        return self._build_csr(np.asarray(weights, dtype=np.float64))

    _csr_cache = None

    def _build_csr(self, weights):
        v = self.vertex_count
        src = np.concatenate([self.edge_u, self.edge_v])
        dst = np.concatenate([self.edge_v, self.edge_u])
        wgt = np.concatenate([weights, weights])
        order = np.argsort(src, kind="stable")
        src, dst, wgt = src[order], dst[order], wgt[order]
        indptr = np.zeros(v + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, dst, wgt

    @cached_property
    def tree_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(parent, depth-from-root, weight-to-parent) for tree kinds."""
        if self.kind not in ("path", "tree"):
            raise ValueError("tree_arrays requires kind=path or kind=tree")
        v = self.vertex_count
        parent = np.full(v, -1, dtype=np.int64)
        depth = np.full(v, -1, dtype=np.int64)
        wpar = np.zeros(v, dtype=np.float64)
        indptr, adj, wadj = self.csr()
        depth[self.root] = 0
        stack = [self.root]
        while stack:
            u = stack.pop()
            for e in range(indptr[u], indptr[u + 1]):
                w = adj[e]
                if depth[w] < 0:
                    depth[w] = depth[u] + 1
                    parent[w] = u
                    wpar[w] = wadj[e]
                    stack.append(w)
        return parent, depth, wpar


def _lattice_pairs(side: int) -> set:
    pairs = set()
    for r in range(side):
        for c in range(side):
            u = r * side + c
            if c + 1 < side:
                pairs.add((u, u + 1))
            if r + 1 < side:
                pairs.add((u, u + side))
    return pairs


# ---------------------------------------------------------------------------
# Weight distributions and generators
# ---------------------------------------------------------------------------

def parse_weight_spec(spec: str):
    """Parse 'uniform:a,b' or 'const:c' into a callable drawing m weights."""
    name, _, args = spec.partition(":")
    name = name.strip().lower()
    if name in ("const", "constant"):
        c = float(args)
        if c < 0:
            raise ValueError("constant weight must be nonnegative")
        return lambda rng, m: np.full(m, c, dtype=np.float64)
    if name == "uniform":
        lo_s, _, hi_s = args.partition(",")
        lo, hi = float(lo_s), float(hi_s)
        if not 0 <= lo <= hi:
            raise ValueError(f"uniform bounds must satisfy 0 <= a <= b, got {lo}, {hi}")
        return lambda rng, m: rng.uniform(lo, hi, size=m)
    raise ValueError(f"unknown weight distribution {spec!r}")


def generate_graph(
    family: str,
    weights: str = "const:1",
    seed: int = 0,
    *,
    nodes: int | None = None,
    depth: int | None = None,
    side: int | None = None,
) -> WeightedGraph:
    """Deterministic graph generator for experiments and tests.

    Families: path (nodes), balanced-tree (depth or nodes, binary),
    random-tree (nodes, depth = max root distance), grid (side), star (nodes).
    The topology and the weights are drawn from independent child streams of
    `seed`, so the same structure appears under every weight distribution.
    """
    draw = parse_weight_spec(weights)
    struct_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 1)))
    weight_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 2)))

    if family == "path":
        n = _require_size("nodes", nodes)
        pairs = [(i, i + 1) for i in range(n - 1)]
        kind, grid_side, root = "path", None, 0
    elif family == "star":
        n = _require_size("nodes", nodes)
        pairs = [(0, i) for i in range(1, n)]
        kind, grid_side, root = "tree", None, 0
    elif family == "balanced-tree":
        if depth is not None:
            if depth < 0:
                raise ValueError("balanced-tree depth must be >= 0")
            n = 2 ** (depth + 1) - 1
        else:
            n = _require_size("nodes", nodes)
        pairs = [((i - 1) // 2, i) for i in range(1, n)]
        kind, grid_side, root = "tree", None, 0
    elif family == "random-tree":
        n = _require_size("nodes", nodes)
        h = _require_size("depth", depth)
        depths = np.zeros(n, dtype=np.int64)
        pairs = []
        eligible = [0]
        for i in range(1, n):
            p = eligible[int(struct_rng.integers(len(eligible)))]
            pairs.append((p, i))
            depths[i] = depths[p] + 1
            if depths[i] < h:
                eligible.append(i)
        kind, grid_side, root = "tree", None, 0
    elif family == "grid":
        s = _require_size("side", side)
        n = s * s
        pairs = sorted(_lattice_pairs(s))
        kind, grid_side, root = "grid", s, None
    else:
        raise ValueError(f"unknown graph family {family!r}")

    pairs = sorted((min(u, v), max(u, v)) for u, v in pairs)
    w = draw(weight_rng, len(pairs))
    edges = [(u, v, float(wi)) for (u, v), wi in zip(pairs, w)]
    return WeightedGraph(kind, n, edges, grid_side=grid_side, root=root)


def _require_size(name: str, value) -> int:
    if value is None or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return int(value)


# ---------------------------------------------------------------------------
# Exact oracles
# ---------------------------------------------------------------------------

def exact_distance(graph: WeightedGraph, s: int, t: int) -> float:
    """Exact shortest-path distance; tree walk for trees, Dijkstra otherwise."""
    _check_vertex(graph, s)
    _check_vertex(graph, t)
    if s == t:
        return 0.0
    if graph.kind in ("path", "tree"):
        parent, depth, wpar = graph.tree_arrays
        total = 0.0
        a, b = s, t
        while depth[a] > depth[b]:
            total += wpar[a]
            a = parent[a]
        while depth[b] > depth[a]:
            total += wpar[b]
            b = parent[b]
        while a != b:
            total += wpar[a] + wpar[b]
            a, b = parent[a], parent[b]
        return total
    indptr, adj, wadj = graph.csr()
    return float(_kernels.dijkstra(indptr, adj, wadj, s)[t])


def exact_all_pairs(graph: WeightedGraph, limit: int = DEFAULT_ALL_PAIRS_LIMIT) -> np.ndarray:
    """Dense exact distance matrix (Floyd-Warshall; per-source walks on trees)."""
    v = graph.vertex_count
    if v > limit:
        raise ResourceLimitError(
            f"exact_all_pairs guarded at V <= {limit}, got V = {v}")
    indptr, adj, wadj = graph.csr()
    if graph.kind in ("path", "tree"):
        return _kernels.all_dijkstra(indptr, adj, wadj)
    dist = np.full((v, v), np.inf)
    np.fill_diagonal(dist, 0.0)
    dist[graph.edge_u, graph.edge_v] = graph.weights
    dist[graph.edge_v, graph.edge_u] = graph.weights
    return _kernels.floyd_warshall(dist)


def check_distance_matrix(matrix: np.ndarray, tol: float = WEIGHT_TOLERANCE) -> None:
    """Assert symmetry, zero diagonal, and the triangle inequality."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("distance matrix must be square")
    if np.abs(np.diagonal(matrix)).max() > tol:
        raise ValueError("distance matrix diagonal must be zero")
    if np.abs(matrix - matrix.T).max() > tol:
        raise ValueError("distance matrix must be symmetric")
    n = matrix.shape[0]
    for k in range(n):
        slack = matrix - (matrix[:, k:k + 1] + matrix[k:k + 1, :])
        if slack.max() > tol:
            raise ValueError("distance matrix violates the triangle inequality")


def _check_vertex(graph: WeightedGraph, v: int) -> None:
    if not 0 <= v < graph.vertex_count:
        raise ValueError(f"vertex id {v} out of range [0, {graph.vertex_count})")


# ---------------------------------------------------------------------------
# Graph file format v1
# ---------------------------------------------------------------------------

GRAPH_MAGIC = "# privdist-graph v1"


def dump_graph(graph: WeightedGraph) -> str:
    parts = [f"{GRAPH_MAGIC} kind={graph.kind} V={graph.vertex_count}"]
    if graph.grid_side is not None:
        parts.append(f"side={graph.grid_side}")
    if graph.root is not None:
        parts.append(f"root={graph.root}")
    lines = [" ".join(parts)]
    for u, v, w in zip(graph.edge_u, graph.edge_v, graph.weights):
        lines.append(f"{u} {v} {float(w)!r}")
    return "\n".join(lines) + "\n"


def save_graph(graph: WeightedGraph, path) -> None:
    Path(path).write_text(dump_graph(graph))


def parse_graph(text: str) -> WeightedGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty graph file")
    header = lines[0]
    if not header.startswith(GRAPH_MAGIC + " "):
        raise ValueError(f"malformed graph header: {header!r}")
    fields = dict(
        item.split("=", 1) for item in header[len(GRAPH_MAGIC):].split() if "=" in item
    )
    if "kind" not in fields or "V" not in fields:
        raise ValueError(f"malformed graph header: {header!r}")
    kind = fields["kind"]
    if kind not in KINDS:
        raise ValueError(f"malformed graph header: unknown kind {kind!r}")
    v = int(fields["V"])
    side = int(fields["side"]) if "side" in fields else None
    root = int(fields["root"]) if "root" in fields else None
    edges = []
    for ln in lines[1:]:
        toks = ln.split()
        if len(toks) != 3:
            raise ValueError(f"malformed edge line: {ln!r}")
        u, vv, w = int(toks[0]), int(toks[1]), float(toks[2])
        if w < 0:
            raise ValueError(f"negative edge weight in line: {ln!r}")
        edges.append((u, vv, w))
    return WeightedGraph(kind, v, edges, grid_side=side, root=root)


def load_graph(path) -> WeightedGraph:
    return parse_graph(Path(path).read_text())
