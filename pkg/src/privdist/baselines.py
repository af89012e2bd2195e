"""Reference mechanisms: per-pair Laplace release and global edge noise.

A single shortest-path distance has sensitivity 1 under unit-L1 weight
perturbations (a shortest path is simple, so each edge contributes at most
once), so one query costs Laplace(1/epsilon). The edge-noise baseline
perturbs every edge weight once with Laplace(1/epsilon) - the weight vector
itself has L1 sensitivity 1 - clamps negatives to zero, and publishes the
noisy graph; every distance computed from it is post-processing.
"""

from dataclasses import dataclass

import numpy as np

from .dp import LaplaceNoiseSource, NoiseLedger
from .graphs import WeightedGraph, exact_all_pairs, exact_distance


def single_pair_release(
    graph: WeightedGraph,
    s: int,
    t: int,
    epsilon: float,
    source: LaplaceNoiseSource,
    scale_override: float | None = None,
) -> float:
    """Exact s-t distance plus Laplace(1/epsilon); epsilon-DP for this query."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    scale = 1.0 / epsilon if scale_override is None else float(scale_override)
    return exact_distance(graph, s, t) + source.sample(scale)


@dataclass
class EdgeNoiseRelease:
    """Noisy-graph release: the clamped noisy weights are the published object."""

    noisy_graph: WeightedGraph
    epsilon: float
    seed: int
    ledger: NoiseLedger
    clamp_nonnegative: bool = False

    mechanism = "edge-noise"

    def all_pairs(self) -> np.ndarray:
        return exact_all_pairs(self.noisy_graph)

    def query(self, s: int, t: int) -> float:
        return exact_distance(self.noisy_graph, s, t)


def build_edge_noise_release(
    graph: WeightedGraph,
    epsilon: float,
    seed: int,
    scale_override: float | None = None,
) -> EdgeNoiseRelease:
    """Perturb every edge weight with Laplace(1/epsilon), clamped at zero."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    scale = 1.0 / epsilon if scale_override is None else float(scale_override)
    source = LaplaceNoiseSource(seed)
    ledger = NoiseLedger()
    noisy = np.empty_like(graph.weights)
    for i, w in enumerate(graph.weights):
        noisy[i] = max(0.0, w + source.sample(scale))
        ledger.record("edge-weight", scale)
    return EdgeNoiseRelease(
        noisy_graph=graph.with_weights(noisy),
        epsilon=epsilon,
        seed=seed,
        ledger=ledger,
    )


def edge_noise_release(graph: WeightedGraph, epsilon: float, seed: int) -> np.ndarray:
    """Noisy all-pairs distance matrix from the edge-noise mechanism."""
    return build_edge_noise_release(graph, epsilon, seed).all_pairs()
