import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privdist.dp import LaplaceNoiseSource, NoiseLedger
from privdist.path_release import (
    PathReleaseSketch,
    build_path_sketch,
    exact_interval_sums,
    greedy_cover,
    num_levels,
    query_path,
)


def zero_noise_sketch(weights, epsilon=1.0, seed=0):
    return build_path_sketch(weights, epsilon, LaplaceNoiseSource(seed),
                             scale_override=0.0)


def subpath_oracle(weights, i, j):
    """Brute-force subpath sum between vertices i and j."""
    a, b = min(i, j), max(i, j)
    return float(np.sum(weights[a:b]))


def test_num_levels():
    assert num_levels(1) == 1
    assert num_levels(2) == 2
    assert num_levels(4) == 3
    assert num_levels(5) == 4
    assert num_levels(1024) == 11
    with pytest.raises(ValueError):
        num_levels(0)


def test_single_edge_sketch():
    sk = zero_noise_sketch([3.0])
    assert sk.levels == 1
    assert sk.noisy_interval_sums[0].tolist() == [3.0]
    assert query_path(sk, 0, 1) == (3.0, 1)


def test_exact_dyadic_sums_power_of_two():
    sk = zero_noise_sketch([1.0, 2.0, 3.0, 4.0])
    assert sk.noisy_interval_sums[0].tolist() == [1.0, 2.0, 3.0, 4.0]
    assert sk.noisy_interval_sums[1].tolist() == [3.0, 7.0]
    assert sk.noisy_interval_sums[2].tolist() == [10.0]
    assert query_path(sk, 1, 4) == (9.0, 2)


def test_ragged_last_interval():
    w = [1.0, 2.0, 3.0, 4.0, 5.0]
    sk = zero_noise_sketch(w)
    assert sk.levels == 4
    value, terms = query_path(sk, 0, 5)
    assert value == pytest.approx(15.0, abs=1e-12)
    assert terms == 1  # the ragged top interval covers the whole range


def test_query_trivials():
    sk = zero_noise_sketch([1.0, 1.0, 1.0])
    assert query_path(sk, 2, 2) == (0.0, 0)
    with pytest.raises(ValueError):
        query_path(sk, 0, 4)
    with pytest.raises(ValueError):
        query_path(sk, -1, 2)


def test_empty_weight_list_rejected():
    with pytest.raises(ValueError):
        build_path_sketch([], 1.0, LaplaceNoiseSource(0))


def test_zero_noise_exhaustive_small_lengths():
    rng = np.random.default_rng(0)
    for length in range(1, 65):
        w = rng.uniform(0, 10, size=length)
        sk = zero_noise_sketch(w)
        bound = 2 * sk.levels
        for i in range(length + 1):
            for j in range(i, length + 1):
                value, terms = query_path(sk, i, j)
                assert value == pytest.approx(subpath_oracle(w, i, j), abs=1e-9)
                assert terms <= bound


def test_zero_noise_sampled_long_path():
    rng = np.random.default_rng(1)
    length = 1024
    w = rng.uniform(0, 1, size=length)
    sk = zero_noise_sketch(w)
    prefix = np.concatenate([[0.0], np.cumsum(w)])
    for _ in range(2000):
        i, j = rng.integers(0, length + 1, size=2)
        value, terms = query_path(sk, int(i), int(j))
        assert value == pytest.approx(abs(prefix[j] - prefix[i]), abs=1e-9)
        assert terms <= 2 * 11


def test_term_bound_exhaustive_up_to_256():
    for length in range(1, 257):
        levels = num_levels(length)
        for i in range(length + 1):
            for j in range(i + 1, length + 1):
                assert len(greedy_cover(i, j, length, levels)) <= 2 * levels


def test_each_edge_in_exactly_levels_intervals():
    for length in (1, 2, 3, 5, 8, 13, 64, 100):
        levels = num_levels(length)
        for edge in range(length):
            containing = 0
            for lvl in range(levels):
                width = 1 << lvl
                start = (edge >> lvl) << lvl
                if start <= edge < min(start + width, length):
                    containing += 1
            assert containing == levels


def test_interval_sensitivity_single_edge():
    # a unit change on one edge moves exactly `levels` interval sums by 1
    rng = np.random.default_rng(3)
    for length in (1, 2, 5, 8, 31):
        w = rng.uniform(1, 2, size=length)
        base = np.concatenate(exact_interval_sums(w))
        levels = num_levels(length)
        for edge in range(length):
            w2 = w.copy()
            w2[edge] += 1.0
            diff = np.abs(np.concatenate(exact_interval_sums(w2)) - base)
            assert diff.sum() == pytest.approx(levels, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=64), st.integers(min_value=0, max_value=2**31))
def test_interval_sensitivity_split_perturbations(length, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 5, size=length)
    base = np.concatenate(exact_interval_sums(w))
    levels = num_levels(length)
    delta = rng.uniform(-1, 1, size=length)
    delta *= 1.0 / max(np.abs(delta).sum(), 1.0)
    w2 = np.maximum(w + delta, 0.0)
    l1 = np.abs(w2 - w).sum()
    diff = np.abs(np.concatenate(exact_interval_sums(w2)) - base).sum()
    assert diff <= levels * l1 + 1e-9
    assert l1 <= 1 + 1e-12


def test_noisy_sums_differ_from_exact():
    w = np.ones(16)
    ledger = NoiseLedger()
    sk = build_path_sketch(w, 1.0, LaplaceNoiseSource(5), ledger, label="p")
    assert sk.noise_scale == pytest.approx(num_levels(16) / 1.0)
    exact = np.concatenate(exact_interval_sums(w))
    assert np.abs(sk.flat_sums() - exact).max() > 0
    assert ledger.count("p") == exact.size


def test_build_deterministic():
    w = np.arange(10, dtype=float)
    a = build_path_sketch(w, 0.5, LaplaceNoiseSource(99))
    b = build_path_sketch(w, 0.5, LaplaceNoiseSource(99))
    assert np.array_equal(a.flat_sums(), b.flat_sums())


def test_additivity_on_aligned_boundaries():
    # covers concatenate exactly when the split point is the aligned power
    # of two below j, so values agree up to float re-association
    rng = np.random.default_rng(7)
    w = rng.uniform(0, 3, size=37)
    sk = build_path_sketch(w, 1.0, LaplaceNoiseSource(3))
    for j in range(2, 37):  # j = L excluded: there the ragged top interval wins
        m = 1 << (j.bit_length() - 1)
        if m == j:
            continue
        whole, _ = query_path(sk, 0, j)
        left, _ = query_path(sk, 0, m)
        right, _ = query_path(sk, m, j)
        assert whole == pytest.approx(left + right, abs=1e-9)


def test_unaligned_additivity_fails_in_general():
    # disjoint covers use different noisy intervals, so splitting at an
    # unaligned vertex changes the value; this is expected behavior
    w = np.ones(8)
    sk = build_path_sketch(w, 0.1, LaplaceNoiseSource(12))
    whole, _ = query_path(sk, 0, 8)
    left, _ = query_path(sk, 0, 3)
    right, _ = query_path(sk, 3, 8)
    assert whole != pytest.approx(left + right, abs=1e-12)


def test_empty_sketch_for_singleton_paths():
    sk = PathReleaseSketch.empty()
    assert query_path(sk, 0, 0) == (0.0, 0)
    with pytest.raises(ValueError):
        query_path(sk, 0, 1)
