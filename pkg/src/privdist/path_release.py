"""Private all-pairs distances on a path via noisy dyadic interval sums.

A path with L edges is summarized by one noisy sum per canonical dyadic
interval of edge indices: level l holds the aligned width-2^l chunks (the
last one ragged when 2^l does not divide L), for l = 0 .. ceil(log2 L).
Each edge lies in exactly `levels` intervals, so the pre-noise statistic
vector has L1 sensitivity `levels` under unit-L1 weight perturbations and
Laplace(levels/epsilon) noise per interval makes the sketch epsilon-DP.

Distance queries cover the requested edge range greedily with maximal
aligned intervals (at most 2*levels of them) and are pure post-processing:
no further noise is drawn, and values may come out negative.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dp import LaplaceNoiseSource, NoiseLedger


def num_levels(edge_count: int) -> int:
    """Number of dyadic levels for a path with `edge_count` edges."""
    if edge_count < 1:
        raise ValueError("edge_count must be >= 1")
    return math.ceil(math.log2(edge_count)) + 1


def level_width(level: int) -> int:
    return 1 << level


def interval_bounds(level: int, index: int, edge_count: int) -> tuple[int, int]:
    """Half-open edge range [start, end) of one canonical interval."""
    start = index << level
    return start, min(start + (1 << level), edge_count)


def exact_interval_sums(weights: np.ndarray) -> list[np.ndarray]:
    """Per-level exact canonical-interval sums of an edge-weight vector."""
    length = weights.size
    sums = []
    for level in range(num_levels(length)):
        width = 1 << level
        starts = np.arange(0, length, width)
        sums.append(np.add.reduceat(weights, starts))
    return sums


@dataclass
class PathReleaseSketch:
    """Noisy dyadic interval sums over one path's edges."""

    edge_count: int
    levels: int
    noisy_interval_sums: list[np.ndarray]
    noise_scale: float
    seed: int

    @classmethod
    def empty(cls, seed: int = 0) -> "PathReleaseSketch":
        """Zero-edge sketch for a singleton path; answers only the 0-0 query."""
        return cls(edge_count=0, levels=0, noisy_interval_sums=[],
                   noise_scale=0.0, seed=seed)

    def flat_sums(self) -> np.ndarray:
        if not self.noisy_interval_sums:
            return np.empty(0, dtype=np.float64)
        return np.concatenate(self.noisy_interval_sums)


def build_path_sketch(
    weights,
    epsilon: float,
    source: LaplaceNoiseSource,
    ledger: NoiseLedger | None = None,
    label: str = "path",
    scale_override: float | None = None,
) -> PathReleaseSketch:
    """Release a path's dyadic interval sums with Laplace(levels/epsilon) noise.

    `scale_override` replaces the privacy-derived noise scale (0 disables
    noise entirely); it exists for testing and is not private.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        raise ValueError("cannot build a path sketch from an empty weight list")
    if np.any(weights < 0):
        raise ValueError("path weights must be nonnegative")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    levels = num_levels(weights.size)
    scale = levels / epsilon if scale_override is None else float(scale_override)
    if scale < 0:
        raise ValueError("noise scale must be nonnegative")
    noisy = []
    for level_sums in exact_interval_sums(weights):
        out = np.empty_like(level_sums)
        for i, value in enumerate(level_sums):
            out[i] = value + source.sample(scale)
            if ledger is not None:
                ledger.record(label, scale)
        noisy.append(out)
    return PathReleaseSketch(
        edge_count=int(weights.size),
        levels=levels,
        noisy_interval_sums=noisy,
        noise_scale=scale,
        seed=source.seed,
    )


def greedy_cover(a: int, b: int, edge_count: int, levels: int):
    """Maximal aligned canonical intervals covering edge range [a, b)."""
    cover = []
    while a < b:
        lvl = levels - 1
        while lvl > 0:
            step = 1 << lvl
            if a % step == 0 and min(a + step, edge_count) <= b:
                break
            lvl -= 1
        end = min(a + (1 << lvl), edge_count)
        cover.append((lvl, a >> lvl))
        a = end
    return cover


def query_path(sketch: PathReleaseSketch, i: int, j: int) -> tuple[float, int]:
    """Released distance between path vertices i and j (post-processing only).

    Returns (value, number of noisy interval terms used).
    """
    if not 0 <= i <= sketch.edge_count or not 0 <= j <= sketch.edge_count:
        raise ValueError(
            f"path vertex index out of range [0, {sketch.edge_count}]: {(i, j)}")
    if i == j:
        return 0.0, 0
    a, b = (i, j) if i < j else (j, i)
    total = 0.0
    terms = 0
    for lvl, idx in greedy_cover(a, b, sketch.edge_count, sketch.levels):
        total += sketch.noisy_interval_sums[lvl][idx]
        terms += 1
    return total, terms
