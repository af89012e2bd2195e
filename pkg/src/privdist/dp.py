"""Laplace sampling, privacy-parameter bookkeeping, and composition accounting.

All privacy and confidence parameters use the natural logarithm; base-2
logarithms appear only in structural counts (dyadic levels, tree depths).
Sampling uses an inverse-CDF transform over a seeded PCG64 stream, which is
bit-reproducible across platforms. No floating-point hardening (snapping) is
applied; this is a research artifact, not a production privacy stack.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(parent_seed: int, *indices: int) -> int:
    """Deterministic child seed for a sub-component of a release build.

    child = splitmix64 chain over (parent, index...). Lets independent
    components (paths, trials, weight streams) own disjoint noise streams
    while the whole build stays reproducible from one root seed.
    """
    s = parent_seed & _MASK64
    for i in indices:
        s = _splitmix64(s ^ _splitmix64((i + 1) & _MASK64))
    return s


@dataclass(frozen=True)
class PrivacyParams:
    """(epsilon, delta) privacy budget plus the utility failure probability gamma."""

    epsilon: float
    delta: float = 0.0
    gamma: float = 0.1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")


class NoiseLedger:
    """Counts Laplace draws per label so tests can audit noise-term budgets."""

    def __init__(self):
        self._entries: dict[str, list[float]] = {}

    def record(self, label: str, scale: float) -> None:
        entry = self._entries.get(label)
        if entry is None:
            self._entries[label] = [scale, 1]
        else:
            if entry[0] != scale:
                raise ValueError(
                    f"ledger label {label!r} reused at scale {scale} != {entry[0]}")
            entry[1] += 1

    def count(self, label: str) -> int:
        entry = self._entries.get(label)
        return 0 if entry is None else entry[1]

    def scale(self, label: str) -> float:
        return self._entries[label][0]

    @property
    def entries(self) -> list[tuple[str, float, int]]:
        return [(label, scale, count) for label, (scale, count) in self._entries.items()]

    @property
    def total_draws(self) -> int:
        return sum(count for _, count in self._entries.values())


class LaplaceNoiseSource:
    """Sequential Laplace(0, scale) sampler over a seeded 64-bit PRNG.

    A fixed seed yields an identical sample sequence; scale-0 requests
    return exactly 0.0 but still consume one uniform so that call sequences
    stay aligned regardless of the scales requested.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.position = 0
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def sample(self, scale: float) -> float:
        if scale < 0:
            raise ValueError(f"noise scale must be nonnegative, got {scale}")
        u = self._rng.random()
        self.position += 1
        if scale == 0:
            return 0.0
        if u <= 0.0:
            u = 2.0 ** -53
        if u < 0.5:
            return scale * math.log(2.0 * u)
        return -scale * math.log(2.0 * (1.0 - u))

    def child(self, *indices: int) -> "LaplaceNoiseSource":
        return LaplaceNoiseSource(derive_seed(self.seed, *indices))


def sample_laplace(source: LaplaceNoiseSource, scale: float) -> float:
    """One draw from Laplace(0, scale); advances the source by one position."""
    return source.sample(scale)


def add_noise(
    value: float,
    scale: float,
    source: LaplaceNoiseSource,
    ledger: NoiseLedger | None = None,
    label: str = "noise",
) -> float:
    """value + Laplace(0, scale), recording the draw under `label`."""
    noisy = value + source.sample(scale)
    if ledger is not None:
        ledger.record(label, scale)
    return noisy


def advanced_composition_epsilon(
    target_epsilon: float, target_delta: float, k: int
) -> float:
    """Per-query epsilon so that k pure-DP queries compose to the target.

    Running k mechanisms, each epsilon-DP at the returned value, yields
    (target_epsilon, target_delta)-DP overall:
        epsilon = target_epsilon / sqrt(8 k ln(1/target_delta)).
    """
    if not target_epsilon > 0:
        raise ValueError(f"target_epsilon must be positive, got {target_epsilon}")
    if not 0 < target_delta < 1:
        raise ValueError(f"target_delta must be in (0, 1), got {target_delta}")
    if not k >= 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    return target_epsilon / math.sqrt(8.0 * k * math.log(1.0 / target_delta))


def composed_privacy(
    epsilon: float, delta: float, k: int, delta_slack: float
) -> tuple[float, float]:
    """Forward adaptive-composition accounting for k (epsilon, delta)-DP runs.

    Returns (epsilon_total, delta_total) with
        epsilon_total = sqrt(2 k ln(1/delta_slack)) * epsilon
                        + k * epsilon * (e^epsilon - 1)
        delta_total   = k * delta + delta_slack.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 <= delta < 1:
        raise ValueError(f"delta must be in [0, 1), got {delta}")
    if not k >= 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if not 0 < delta_slack < 1:
        raise ValueError(f"delta_slack must be in (0, 1), got {delta_slack}")
    eps_total = math.sqrt(2.0 * k * math.log(1.0 / delta_slack)) * epsilon
    eps_total += k * epsilon * (math.exp(epsilon) - 1.0)
    return eps_total, k * delta + delta_slack


def laplace_sum_bound(n: int, b: float, gamma: float) -> float:
    """High-probability bound on |sum of n i.i.d. Laplace(b) variables|.

    With probability at least 1 - gamma the sum stays within
    2*sqrt(2) * b * sqrt(n) * ln(2/gamma). The bound is calibrated for
    gamma in (2/e^n, 1); outside that range it still returns the formula
    but emits a warning.
    """
    if not n >= 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if math.log(gamma / 2.0) <= -n:
        warnings.warn(
            f"laplace_sum_bound: gamma={gamma} is at or below 2/e^n for n={n}; "
            "the concentration guarantee does not cover this regime",
            stacklevel=2,
        )
    return 2.0 * math.sqrt(2.0) * b * math.sqrt(n) * math.log(2.0 / gamma)
