"""Empirical verification harness.

Generates neighboring weight functions (total L1 shift at most 1, weights
kept nonnegative), audits the L1 sensitivity of each mechanism's pre-noise
statistic vector against the bound its noise scale assumes, and measures
additive error of fresh releases against the exact oracles. Everything is
bit-reproducible from the seeds; trials may run on a thread pool capped by
the PRIVDIST_THREADS environment variable (default 1).
"""

import heapq
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines, grid_release, tree_release
from .dp import PrivacyParams, derive_seed
from .graphs import WeightedGraph, exact_all_pairs, exact_distance, generate_graph

AUDIT_TOLERANCE = 1e-9

#: exhaustive pair evaluation up to this many vertices; sampled beyond
EXHAUSTIVE_PAIR_LIMIT = 512
DEFAULT_SAMPLE_SIZE = 10_000

CSV_HEADER = ("mechanism,V,h,epsilon,delta,gamma,trial,"
              "max_abs_error,p50,p90,p99,noise_term_max,runtime_ms")


def thread_cap() -> int:
    raw = os.environ.get("PRIVDIST_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"PRIVDIST_THREADS must be an integer, got {raw!r}")


# ---------------------------------------------------------------------------
# Neighboring weight functions
# ---------------------------------------------------------------------------

NEIGHBOR_MODES = ("single-edge", "adversarial-path")  # plus spread-<k>


@dataclass
class NeighboringPerturbation:
    """Sparse weight shift with total L1 mass at most one unit."""

    deltas: dict[int, float]

    @property
    def l1_norm(self) -> float:
        return sum(abs(d) for d in self.deltas.values())

    def apply(self, weights: np.ndarray) -> np.ndarray:
        out = np.array(weights, dtype=np.float64, copy=True)
        for eid, delta in self.deltas.items():
            out[eid] += delta
        return out


def random_neighbor(
    weights,
    mode: str,
    seed,
    graph: WeightedGraph | None = None,
) -> tuple[np.ndarray, NeighboringPerturbation]:
    """Draw a neighboring weight vector (returns it with its perturbation).

    Modes: `single-edge` puts a full +-1 on one edge; `spread-<k>` splits the
    unit over k random edges with random signs; `adversarial-path` spreads it
    along one root-to-leaf walk (trees) or one shortest s-t path (other
    kinds). Draws are rejected and resampled while they would push a weight
    negative; after 100 attempts a ValueError is raised.
    """
    weights = np.asarray(weights, dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else \
        np.random.Generator(np.random.PCG64(seed))
    for _ in range(100):
        pert = _propose(weights, mode, rng, graph)
        new = pert.apply(weights)
        if new.min() >= 0:
            return new, pert
    raise ValueError(f"could not find a feasible {mode!r} neighbor in 100 attempts")


def _propose(weights, mode, rng, graph) -> NeighboringPerturbation:
    m = weights.size
    if mode == "single-edge":
        eid = int(rng.integers(m))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return NeighboringPerturbation({eid: sign})
    if mode.startswith("spread-"):
        k = int(mode.split("-", 1)[1])
        if not 1 <= k <= m:
            raise ValueError(f"spread size must be in [1, {m}], got {k}")
        ids = rng.choice(m, size=k, replace=False)
        signs = np.where(rng.random(k) < 0.5, 1.0, -1.0)
        return NeighboringPerturbation(
            {int(e): float(s) / k for e, s in zip(ids, signs)})
    if mode == "adversarial-path":
        if graph is None:
            raise ValueError("adversarial-path mode needs the graph topology")
        edge_ids = _random_path_edges(graph, rng)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return NeighboringPerturbation(
            {eid: sign / len(edge_ids) for eid in edge_ids})
    raise ValueError(f"unknown neighbor mode {mode!r}")


def _random_path_edges(graph: WeightedGraph, rng) -> list[int]:
    if graph.kind in ("path", "tree"):
        parent, depth, _ = graph.tree_arrays
        child_count = np.bincount(parent[parent >= 0], minlength=graph.vertex_count)
        leaves = np.flatnonzero(child_count == 0)
        leaf = int(leaves[int(rng.integers(leaves.size))]) if leaves.size else graph.root
        edges = []
        v = leaf
        while parent[v] >= 0:
            edges.append(graph.edge_index(int(parent[v]), v))
            v = int(parent[v])
        return edges or [0]
    s, t = rng.choice(graph.vertex_count, size=2, replace=False)
    return _shortest_path_edges(graph, int(s), int(t))


def _shortest_path_edges(graph: WeightedGraph, s: int, t: int) -> list[int]:
    indptr, adj, wadj = graph.csr()
    dist = np.full(graph.vertex_count, np.inf)
    prev = np.full(graph.vertex_count, -1, dtype=np.int64)
    dist[s] = 0.0
    heap = [(0.0, s)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == t:
            break
        if d > dist[u]:
            continue
        for e in range(indptr[u], indptr[u + 1]):
            v = int(adj[e])
            nd = d + wadj[e]
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    edges = []
    v = t
    while v != s:
        u = int(prev[v])
        edges.append(graph.edge_index(u, v))
        v = u
    return edges


# ---------------------------------------------------------------------------
# Sensitivity audits
# ---------------------------------------------------------------------------

def _audit_modes(edge_count: int) -> list[str]:
    modes = ["single-edge", "adversarial-path"]
    for k in (2, 4, 8):
        if k <= edge_count:
            modes.append(f"spread-{k}")
    modes.append(f"spread-{edge_count}")
    return modes


def sensitivity_audit(
    mechanism: str,
    graph: WeightedGraph,
    trials: int,
    seed: int,
) -> tuple[float, float, bool]:
    """Max observed statistic change over random neighbors vs the claimed bound.

    The statistic is the mechanism's pre-noise release vector; tree/path and
    edge-noise audits measure the L1 change, the grid audit measures the
    per-coordinate change (each coordinate is a sensitivity-1 distance).
    Returns (max_observed, claimed_bound, pass).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    if mechanism == "tree":
        decomp = tree_release.decompose(graph)
        claimed = tree_release.statistic_sensitivity_bound(decomp)
        base = tree_release.statistic_vector(decomp, graph)

        def stat(w):
            return tree_release.statistic_vector(decomp, graph, weights=w)

        reduce_abs = _l1
    elif mechanism == "path":
        if graph.kind != "path":
            raise ValueError("path audit requires kind=path")
        order = _chain_edge_order(graph)
        claimed = float(tree_release.num_levels(len(order)))
        base_weights = graph.weights[order]
        from .path_release import exact_interval_sums

        base = np.concatenate(exact_interval_sums(base_weights))

        def stat(w):
            return np.concatenate(exact_interval_sums(np.asarray(w)[order]))

        reduce_abs = _l1
    elif mechanism == "grid":
        partition = grid_release.partition_grid(graph)
        pairs = grid_release.direct_pairs(partition)
        claimed = 1.0
        base = grid_release.direct_exact_vector(graph, partition, pairs)

        def stat(w):
            return grid_release.direct_exact_vector(graph, partition, pairs, weights=w)

        reduce_abs = _linf
    elif mechanism == "edge-noise":
        claimed = 1.0
        base = np.array(graph.weights)

        def stat(w):
            return np.asarray(w, dtype=np.float64)

        reduce_abs = _l1
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")

    modes = _audit_modes(graph.edge_count)
    max_observed = 0.0
    for trial in range(trials):
        mode = modes[trial % len(modes)]
        neighbor, _ = random_neighbor(graph.weights, mode, rng, graph=graph)
        observed = reduce_abs(stat(neighbor) - base)
        if observed > max_observed:
            max_observed = observed
    return max_observed, claimed, max_observed <= claimed + AUDIT_TOLERANCE


def _l1(diff: np.ndarray) -> float:
    return float(np.abs(diff).sum())


def _linf(diff: np.ndarray) -> float:
    return float(np.abs(diff).max())


def _chain_edge_order(graph: WeightedGraph) -> np.ndarray:
    parent, depth, _ = graph.tree_arrays
    order = np.argsort(depth, kind="stable")
    ids = [graph.edge_index(int(parent[v]), int(v)) for v in order[1:]]
    return np.asarray(ids, dtype=np.int64)


# ---------------------------------------------------------------------------
# Additive-error evaluation
# ---------------------------------------------------------------------------

@dataclass
class ReleaseConfig:
    """Mechanism choice plus the knobs a release build needs."""

    mechanism: str  # tree | grid | edge-noise
    epsilon: float
    delta: float = 0.0
    gamma: float = 0.1
    scale_override: float | None = None
    clamp: bool = False

    def params(self) -> PrivacyParams:
        return PrivacyParams(self.epsilon, self.delta, self.gamma)


@dataclass
class ErrorReport:
    """Aggregated additive-error measurements for one graph and mechanism."""

    mechanism: str
    vertex_count: int
    tree_depth: int | None
    epsilon: float
    delta: float
    gamma: float
    trials: int
    max_abs_error: float
    quantiles: list[tuple[float, float]]
    noise_term_max: int
    runtime_ms: int
    trial_rows: list[dict] = field(repr=False, default_factory=list)
    trial_max_errors: list[float] = field(default_factory=list)
    pairs_evaluated: int = 0
    sampled: bool = False
    noise_draws: int = 0

    @property
    def median_max_error(self) -> float:
        return float(np.median(self.trial_max_errors))


def _eval_pairs(graph: WeightedGraph, seed: int, sample_size: int):
    v = graph.vertex_count
    if v <= EXHAUSTIVE_PAIR_LIMIT:
        src, dst = np.triu_indices(v, k=1)
        return src.astype(np.int64), dst.astype(np.int64), False
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0xA11)))
    src = rng.integers(0, v, size=sample_size, dtype=np.int64)
    dst = rng.integers(0, v - 1, size=sample_size, dtype=np.int64)
    dst[dst >= src] += 1  # uniform over ordered pairs with s != t
    return src, dst, True


def _exact_for_pairs(graph: WeightedGraph, src, dst, sampled: bool) -> np.ndarray:
    if not sampled:
        return exact_all_pairs(graph)[src, dst]
    if graph.kind in ("path", "tree"):
        return np.asarray([exact_distance(graph, int(s), int(t))
                           for s, t in zip(src, dst)])
    from . import _kernels

    indptr, adj, wadj = graph.csr()
    rows = {}
    out = np.empty(src.size)
    for i, (s, t) in enumerate(zip(src, dst)):
        s = int(s)
        if s not in rows:
            rows[s] = _kernels.dijkstra(indptr, adj, wadj, s)
        out[i] = rows[s][int(t)]
    return out


def evaluate_errors(
    graph: WeightedGraph,
    config: ReleaseConfig,
    trials: int,
    gamma: float,
    seed: int,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
) -> ErrorReport:
    """Per-trial fresh releases measured against the exact oracle.

    Pairs are exhaustive up to V=512 and a fixed seeded sample of
    `sample_size` ordered pairs beyond that (the same pair set for every
    trial, so trial maxima are comparable across trials).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    src, dst, sampled = _eval_pairs(graph, seed, sample_size)
    exact = _exact_for_pairs(graph, src, dst, sampled)

    shared = {}
    if config.mechanism == "tree":
        shared["decomposition"] = tree_release.decompose(graph)
        tree_depth = shared["decomposition"].tree_depth
    elif config.mechanism == "grid":
        shared["partition"] = grid_release.partition_grid(graph)
        shared["pairs"] = grid_release.direct_pairs(shared["partition"])
        shared["exact_values"] = grid_release.direct_exact_vector(
            graph, shared["partition"], shared["pairs"])
        tree_depth = None
    elif config.mechanism == "edge-noise":
        tree_depth = None
    else:
        raise ValueError(f"unknown mechanism {config.mechanism!r}")

    def run_trial(trial: int) -> dict:
        t0 = time.perf_counter()
        trial_seed = derive_seed(seed, trial)
        if config.mechanism == "tree":
            sketch = tree_release.build_tree_sketch(
                graph, config.params(), trial_seed,
                scale_override=config.scale_override,
                decomposition=shared["decomposition"])
            values, terms = tree_release.query_tree_pairs(sketch, src, dst)
            term_max = int(terms.max()) if terms.size else 0
            draws = sketch.ledger.total_draws
        elif config.mechanism == "grid":
            sketch = grid_release.build_grid_sketch(
                graph, config.params(), trial_seed,
                scale_override=config.scale_override,
                partition=shared["partition"],
                pairs=shared["pairs"],
                exact_values=shared["exact_values"])
            if sampled:
                values = np.asarray([
                    grid_release.query_grid(sketch, int(s), int(t))
                    for s, t in zip(src, dst)])
            else:
                values = grid_release.query_grid_all_pairs(sketch)[src, dst]
            term_max = grid_release.grid_query_terms_max(sketch)
            draws = sketch.ledger.total_draws
        else:
            release = baselines.build_edge_noise_release(
                graph, config.epsilon, trial_seed,
                scale_override=config.scale_override)
            if sampled:
                values = _exact_for_pairs(release.noisy_graph, src, dst, True)
            else:
                values = release.all_pairs()[src, dst]
            term_max = 0
            draws = release.ledger.total_draws
        if config.clamp:
            values = np.maximum(values, 0.0)
        errors = np.abs(values - exact)
        elapsed_ms = int(round(1000 * (time.perf_counter() - t0)))
        return {
            "trial": trial,
            "max_abs_error": float(errors.max()),
            "p50": float(np.quantile(errors, 0.5)),
            "p90": float(np.quantile(errors, 0.9)),
            "p99": float(np.quantile(errors, 0.99)),
            "noise_term_max": term_max,
            "runtime_ms": elapsed_ms,
            "errors": errors,
            "draws": draws,
        }

    workers = thread_cap()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_trial, range(trials)))
    else:
        results = [run_trial(t) for t in range(trials)]

    pooled = np.concatenate([r["errors"] for r in results])
    rows = []
    for r in results:
        row = {
            "mechanism": config.mechanism,
            "V": graph.vertex_count,
            "h": tree_depth if tree_depth is not None else "",
            "epsilon": config.epsilon,
            "delta": config.delta,
            "gamma": gamma,
        }
        row.update({k: r[k] for k in (
            "trial", "max_abs_error", "p50", "p90", "p99",
            "noise_term_max", "runtime_ms")})
        rows.append(row)
    return ErrorReport(
        mechanism=config.mechanism,
        vertex_count=graph.vertex_count,
        tree_depth=tree_depth,
        epsilon=config.epsilon,
        delta=config.delta,
        gamma=gamma,
        trials=trials,
        max_abs_error=float(pooled.max()),
        quantiles=[(q, float(np.quantile(pooled, q))) for q in (0.5, 0.9, 0.99)],
        noise_term_max=max(r["noise_term_max"] for r in results),
        runtime_ms=sum(r["runtime_ms"] for r in results),
        trial_rows=rows,
        trial_max_errors=[r["max_abs_error"] for r in results],
        pairs_evaluated=int(src.size),
        sampled=sampled,
        noise_draws=max(r["draws"] for r in results),
    )


# ---------------------------------------------------------------------------
# Scaling experiments and CSV emission
# ---------------------------------------------------------------------------

def scaling_experiment(
    family: str,
    sizes,
    config: ReleaseConfig,
    trials: int,
    seed: int,
    weights: str = "uniform:1,2",
) -> list[ErrorReport]:
    """One ErrorReport per size; tree sizes are vertex counts, grid sizes sides."""
    reports = []
    for i, size in enumerate(sizes):
        if family == "tree":
            graph = generate_graph("balanced-tree", weights,
                                   seed=derive_seed(seed, 7, i), nodes=size)
        elif family == "grid":
            graph = generate_graph("grid", weights,
                                   seed=derive_seed(seed, 7, i), side=size)
        else:
            raise ValueError(f"unknown sweep family {family!r}")
        reports.append(evaluate_errors(
            graph, config, trials, config.gamma, derive_seed(seed, 11, i)))
    return reports


def csv_text(reports) -> str:
    lines = [CSV_HEADER]
    for report in reports:
        for row in report.trial_rows:
            lines.append(
                f"{row['mechanism']},{row['V']},{row['h']},{row['epsilon']},"
                f"{row['delta']},{row['gamma']},{row['trial']},"
                f"{row['max_abs_error']!r},{row['p50']!r},{row['p90']!r},"
                f"{row['p99']!r},{row['noise_term_max']},{row['runtime_ms']}")
    return "\n".join(lines) + "\n"


def write_csv(reports, path) -> None:
    from .release_io import atomic_write_text

    atomic_write_text(path, csv_text(reports))


def gnuplot_script(csv_path: str, png_path: str = "scaling.png") -> str:
    """Plot script referencing the sweep CSV; emitted as text, never executed."""
    return "\n".join([
        "set datafile separator ','",
        f"set output '{png_path}'",
        "set terminal pngcairo size 900,600",
        "set logscale xy",
        "set xlabel 'V'",
        "set ylabel 'max additive error'",
        "set key top left",
        f"plot '{csv_path}' every ::1 using 2:8 with points title 'trial max error'",
        "",
    ])


def write_gnuplot_script(csv_path, script_path, png_path="scaling.png") -> None:
    from .release_io import atomic_write_text

    atomic_write_text(script_path, gnuplot_script(str(csv_path), png_path))
