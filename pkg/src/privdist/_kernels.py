"""Numeric kernels with a numba fast path and a numpy/scipy fallback.

The backend is chosen once at import time from the ``PRIVDIST_BACKEND``
environment variable: ``numba`` (default when numba imports cleanly),
``numpy``, or ``auto``. Both lanes implement identical arithmetic so that
results agree bit-for-bit wherever we control both sides; the benchmark
script in ``benchmarks/`` compares their throughput.
"""

import os

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph


def _resolve_backend() -> str:
    requested = os.environ.get("PRIVDIST_BACKEND", "auto").strip().lower()
    if requested not in ("auto", "numba", "numpy"):
        raise ValueError(f"PRIVDIST_BACKEND must be auto|numba|numpy, got {requested!r}")
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _resolve_backend()

if BACKEND == "numba":
    from numba import njit

    _JIT_OPTS = dict(cache=True, nogil=True)
else:  # pragma: no cover - exercised via PRIVDIST_BACKEND=numpy runs
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    _JIT_OPTS = {}


# ---------------------------------------------------------------------------
# Floyd-Warshall
# ---------------------------------------------------------------------------

def floyd_warshall_numpy(dist: np.ndarray) -> np.ndarray:
    """In-place all-pairs min-plus closure of a dense distance matrix."""
    n = dist.shape[0]
    for k in range(n):
        np.minimum(dist, np.add.outer(dist[:, k], dist[k, :]), out=dist)
    return dist


@njit(**_JIT_OPTS)
def _floyd_warshall_nb(dist):
    n = dist.shape[0]
    for k in range(n):
        for i in range(n):
            dik = dist[i, k]
            for j in range(n):
                alt = dik + dist[k, j]
                if alt < dist[i, j]:
                    dist[i, j] = alt
    return dist


def floyd_warshall_numba(dist: np.ndarray) -> np.ndarray:
    return _floyd_warshall_nb(dist)


# ---------------------------------------------------------------------------
# Dijkstra (CSR adjacency: indptr, neighbor ids, edge weights)
# ---------------------------------------------------------------------------

@njit(**_JIT_OPTS)
def _dijkstra_nb(indptr, adj, wadj, source):
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    cap = adj.shape[0] + 2
    heap_d = np.empty(cap, np.float64)
    heap_v = np.empty(cap, np.int64)
    heap_d[0] = 0.0
    heap_v[0] = source
    size = 1
    while size > 0:
        d = heap_d[0]
        u = heap_v[0]
        size -= 1
        heap_d[0] = heap_d[size]
        heap_v[0] = heap_v[size]
        # sift down
        i = 0
        while True:
            left = 2 * i + 1
            if left >= size:
                break
            small = left
            right = left + 1
            if right < size and heap_d[right] < heap_d[left]:
                small = right
            if heap_d[small] >= heap_d[i]:
                break
            heap_d[i], heap_d[small] = heap_d[small], heap_d[i]
            heap_v[i], heap_v[small] = heap_v[small], heap_v[i]
            i = small
        if d > dist[u]:
            continue
        for e in range(indptr[u], indptr[u + 1]):
            v = adj[e]
            nd = d + wadj[e]
            if nd < dist[v]:
                dist[v] = nd
                # sift up
                j = size
                heap_d[j] = nd
                heap_v[j] = v
                size += 1
                while j > 0:
                    parent = (j - 1) // 2
                    if heap_d[parent] <= heap_d[j]:
                        break
                    heap_d[parent], heap_d[j] = heap_d[j], heap_d[parent]
                    heap_v[parent], heap_v[j] = heap_v[j], heap_v[parent]
                    j = parent
    return dist


def dijkstra_numba(indptr, adj, wadj, source: int) -> np.ndarray:
    return _dijkstra_nb(indptr, adj, wadj, np.int64(source))


def dijkstra_numpy(indptr, adj, wadj, source: int) -> np.ndarray:
    n = indptr.shape[0] - 1
    mat = scipy.sparse.csr_matrix((wadj, adj, indptr), shape=(n, n))
    return scipy.sparse.csgraph.dijkstra(mat, directed=True, indices=source)


def all_dijkstra_numpy(indptr, adj, wadj) -> np.ndarray:
    n = indptr.shape[0] - 1
    mat = scipy.sparse.csr_matrix((wadj, adj, indptr), shape=(n, n))
    return scipy.sparse.csgraph.dijkstra(mat, directed=True)


@njit(**_JIT_OPTS)
def _all_dijkstra_nb(indptr, adj, wadj):
    n = indptr.shape[0] - 1
    out = np.empty((n, n), np.float64)
    for s in range(n):
        out[s, :] = _dijkstra_nb(indptr, adj, wadj, s)
    return out


def all_dijkstra_numba(indptr, adj, wadj) -> np.ndarray:
    return _all_dijkstra_nb(indptr, adj, wadj)


# ---------------------------------------------------------------------------
# Grid cross-block composition: min over hubs of d(s,u) + d(u,v) + d(v,t)
# ---------------------------------------------------------------------------

def cross_block_table_numpy(intra_i, hub_ij, intra_j) -> np.ndarray:
    """Released distances for every (s, t) pair across two blocks.

    intra_i: (|B_i|, |A_i|) released values between block-i vertices and its
    boundary hubs; hub_ij: (|A_i|, |A_j|) released hub values; intra_j is the
    analogue for the target block. Association order matches the numba lane.
    """
    tmp = intra_i[:, :, None] + hub_ij[None, :, :]
    tmp = tmp.min(axis=1)
    return (tmp[:, :, None] + intra_j.T[None, :, :]).min(axis=1)


@njit(**_JIT_OPTS)
def _cross_block_table_nb(intra_i, hub_ij, intra_j):
    ni = intra_i.shape[0]
    nj = intra_j.shape[0]
    ai = intra_i.shape[1]
    aj = intra_j.shape[1]
    tmp = np.empty((ni, aj), np.float64)
    for s in range(ni):
        for v in range(aj):
            best = np.inf
            for u in range(ai):
                cand = intra_i[s, u] + hub_ij[u, v]
                if cand < best:
                    best = cand
            tmp[s, v] = best
    out = np.empty((ni, nj), np.float64)
    for s in range(ni):
        for t in range(nj):
            best = np.inf
            for v in range(aj):
                cand = tmp[s, v] + intra_j[t, v]
                if cand < best:
                    best = cand
            out[s, t] = best
    return out


def cross_block_table_numba(intra_i, hub_ij, intra_j) -> np.ndarray:
    return _cross_block_table_nb(intra_i, hub_ij, intra_j)


# ---------------------------------------------------------------------------
# Bulk tree-sketch queries over a flattened sketch representation
# ---------------------------------------------------------------------------
#
# Flattened layout (see tree_release.TreeReleaseSketch.flatten):
#   path_of[v], pos_of[v]      vertex -> heavy path id and position on it
#   head_parent[p]             parent vertex of path p's head (-1 for root path)
#   head_depth[p]              root-depth of path p's head
#   light_val[p]               noisy weight of the light edge above path p's head
#   path_len[p], path_levels[p]
#   lvl_off[p*(max_levels+1) + l] start of level-l sums inside `sums`
#
# The greedy dyadic cover and the accumulation order are identical to the
# pure-Python query path, so both lanes return bit-equal values.


@njit(**_JIT_OPTS)
def _range_query_nb(sums, lvl_off, base, length, levels, a, b):
    total = 0.0
    terms = 0
    while a < b:
        lvl = levels - 1
        while lvl > 0:
            step = 1 << lvl
            if a % step == 0:
                end = a + step
                if end > length:
                    end = length
                if end <= b:
                    break
            lvl -= 1
        step = 1 << lvl
        end = a + step
        if end > length:
            end = length
        total += sums[lvl_off[base + lvl] + (a >> lvl)]
        terms += 1
        a = end
    return total, terms


@njit(**_JIT_OPTS)
def _query_tree_nb(
    path_of, pos_of, head_parent, head_depth, light_val,
    path_len, path_levels, lvl_off, max_levels, sums, s, t,
):
    total = 0.0
    terms = 0
    while path_of[s] != path_of[t]:
        ps = path_of[s]
        pt = path_of[t]
        if head_depth[ps] >= head_depth[pt]:
            val, k = _range_query_nb(
                sums, lvl_off, ps * (max_levels + 1), path_len[ps],
                path_levels[ps], 0, pos_of[s])
            total += val
            terms += k
            total += light_val[ps]
            terms += 1
            s = head_parent[ps]
        else:
            val, k = _range_query_nb(
                sums, lvl_off, pt * (max_levels + 1), path_len[pt],
                path_levels[pt], 0, pos_of[t])
            total += val
            terms += k
            total += light_val[pt]
            terms += 1
            t = head_parent[pt]
    p = path_of[s]
    a = pos_of[s]
    b = pos_of[t]
    if a > b:
        a, b = b, a
    val, k = _range_query_nb(
        sums, lvl_off, p * (max_levels + 1), path_len[p], path_levels[p], a, b)
    total += val
    terms += k
    return total, terms


@njit(**_JIT_OPTS)
def _query_tree_pairs_nb(
    path_of, pos_of, head_parent, head_depth, light_val,
    path_len, path_levels, lvl_off, max_levels, sums, src, dst,
):
    n = src.shape[0]
    values = np.empty(n, np.float64)
    terms = np.empty(n, np.int64)
    for i in range(n):
        v, k = _query_tree_nb(
            path_of, pos_of, head_parent, head_depth, light_val,
            path_len, path_levels, lvl_off, max_levels, sums,
            src[i], dst[i])
        values[i] = v
        terms[i] = k
    return values, terms


def query_tree_pairs_numba(flat, src, dst):
    return _query_tree_pairs_nb(
        flat.path_of, flat.pos_of, flat.head_parent, flat.head_depth,
        flat.light_val, flat.path_len, flat.path_levels, flat.lvl_off,
        flat.max_levels, flat.sums, src, dst)


# ---------------------------------------------------------------------------
# Public dispatch
# ---------------------------------------------------------------------------

_IMPLS = {
    "numpy": {
        "floyd_warshall": floyd_warshall_numpy,
        "dijkstra": dijkstra_numpy,
        "all_dijkstra": all_dijkstra_numpy,
        "cross_block_table": cross_block_table_numpy,
    },
    "numba": {
        "floyd_warshall": floyd_warshall_numba,
        "dijkstra": dijkstra_numba,
        "all_dijkstra": all_dijkstra_numba,
        "cross_block_table": cross_block_table_numba,
    },
}


def floyd_warshall(dist: np.ndarray) -> np.ndarray:
    return _IMPLS[BACKEND]["floyd_warshall"](dist)


def dijkstra(indptr, adj, wadj, source: int) -> np.ndarray:
    return _IMPLS[BACKEND]["dijkstra"](indptr, adj, wadj, source)


def all_dijkstra(indptr, adj, wadj) -> np.ndarray:
    return _IMPLS[BACKEND]["all_dijkstra"](indptr, adj, wadj)


def cross_block_table(intra_i, hub_ij, intra_j) -> np.ndarray:
    return _IMPLS[BACKEND]["cross_block_table"](intra_i, hub_ij, intra_j)
