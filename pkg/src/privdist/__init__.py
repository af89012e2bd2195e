"""Differentially private all-pairs shortest-path release.

Topology is public, edge weights are private; neighboring inputs differ by
at most one unit of weight in L1. The tree mechanism combines heavy-path
decomposition with dyadic interval sketches; the grid mechanism releases a
noisy table over block-boundary hubs. Exact oracles, baselines, and an
audit harness round out the library.
"""

from ._kernels import BACKEND
from .audit import (
    ErrorReport,
    NeighboringPerturbation,
    ReleaseConfig,
    evaluate_errors,
    random_neighbor,
    scaling_experiment,
    sensitivity_audit,
)
from .baselines import build_edge_noise_release, edge_noise_release, single_pair_release
from .dp import (
    LaplaceNoiseSource,
    NoiseLedger,
    PrivacyParams,
    add_noise,
    advanced_composition_epsilon,
    composed_privacy,
    derive_seed,
    laplace_sum_bound,
    sample_laplace,
)
from .graphs import (
    ResourceLimitError,
    WeightedGraph,
    check_distance_matrix,
    exact_all_pairs,
    exact_distance,
    generate_graph,
    load_graph,
    save_graph,
)
from .grid_release import (
    BlockPartition,
    GridReleaseSketch,
    build_grid_sketch,
    partition_grid,
    query_grid,
    query_grid_all_pairs,
)
from .path_release import PathReleaseSketch, build_path_sketch, query_path
from .release_io import load_release, query_release, save_release
from .tree_release import (
    HeavyPathDecomposition,
    TreeReleaseSketch,
    build_tree_sketch,
    decompose,
    lca,
    query_tree,
    query_tree_pairs,
)

__version__ = "0.1.0"
