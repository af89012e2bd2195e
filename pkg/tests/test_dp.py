import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from privdist.dp import (
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


def test_privacy_params_validation():
    PrivacyParams(1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        PrivacyParams(0.0)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 1.0)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 0.0, 0.0)


def test_scale_zero_returns_exact_zero():
    src = LaplaceNoiseSource(0)
    assert sample_laplace(src, 0.0) == 0.0
    assert src.position == 1


def test_negative_scale_rejected():
    with pytest.raises(ValueError):
        sample_laplace(LaplaceNoiseSource(0), -1.0)


def test_fixed_seed_reproduces_stream():
    a = LaplaceNoiseSource(42)
    b = LaplaceNoiseSource(42)
    draws_a = [sample_laplace(a, 1.0) for _ in range(10)]
    draws_b = [sample_laplace(b, 1.0) for _ in range(10)]
    assert draws_a == draws_b
    assert a.position == b.position == 10


def test_scale_zero_keeps_stream_aligned():
    a = LaplaceNoiseSource(7)
    b = LaplaceNoiseSource(7)
    sample_laplace(a, 0.0)
    sample_laplace(b, 2.0)
    assert sample_laplace(a, 1.0) == sample_laplace(b, 1.0)


def test_sampler_moments():
    src = LaplaceNoiseSource(123)
    draws = np.array([sample_laplace(src, 1.0) for _ in range(100_000)])
    assert abs(draws.mean()) < 0.02
    assert abs(draws.var() - 2.0) < 0.1


@pytest.mark.parametrize("b", [0.5, 1.0, 5.0])
def test_sampler_ks_statistic(b):
    src = LaplaceNoiseSource(987 + int(10 * b))
    n = 100_000
    draws = np.array([sample_laplace(src, b) for _ in range(n)])
    stat = scipy.stats.kstest(draws, scipy.stats.laplace(scale=b).cdf).statistic
    assert stat < 1.62762 / math.sqrt(n)  # 1% critical value
    assert abs(draws.var() - 2 * b * b) <= 0.05 * 2 * b * b


def test_add_noise_and_ledger_counts():
    src = LaplaceNoiseSource(5)
    ledger = NoiseLedger()
    assert add_noise(5.0, 0.0, src, ledger, "zero") == 5.0
    for _ in range(3):
        add_noise(1.0, 1.0, src, ledger, "light-edge")
    assert ledger.count("light-edge") == 3
    assert ledger.scale("light-edge") == 1.0
    assert ledger.count("zero") == 1
    assert ledger.total_draws == 4
    assert ("light-edge", 1.0, 3) in ledger.entries
    with pytest.raises(ValueError):
        ledger.record("light-edge", 2.0)  # same label, different scale


def test_add_noise_unbiased_monte_carlo():
    src = LaplaceNoiseSource(31337)
    vals = np.array([add_noise(0.0, 1.0, src) for _ in range(100_000)])
    assert abs(vals.mean()) < 0.02


def test_composition_trivial_point():
    assert advanced_composition_epsilon(1.0, math.exp(-1 / 8), 1) == pytest.approx(
        1.0, abs=1e-12)


def test_composition_derived_points():
    # frozen from 1 / sqrt(8 * 4096 * ln(1e6))
    assert advanced_composition_epsilon(1.0, 1e-6, 4096) == pytest.approx(
        0.0014862489574282234, abs=1e-12)
    # per-query Laplace scale 1/eps equals the closed form V^(3/4) sqrt(8 ln(1/delta))
    for v in (16, 81, 256, 625):
        k = round(v ** 1.5)
        per_query = 1.0 / advanced_composition_epsilon(1.0, 1e-6, k)
        closed = v ** 0.75 * math.sqrt(8 * math.log(1e6))
        assert abs(per_query - closed) < 1e-9


def test_composition_validation():
    with pytest.raises(ValueError):
        advanced_composition_epsilon(1.0, 1e-6, 0)
    with pytest.raises(ValueError):
        advanced_composition_epsilon(1.0, 0.0, 4)
    with pytest.raises(ValueError):
        advanced_composition_epsilon(1.0, 1.0, 4)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=0.01, max_value=10),
    st.floats(min_value=1e-9, max_value=0.5),
    st.integers(min_value=1, max_value=10**6),
)
def test_composition_monotone(eps, delta, k):
    base = advanced_composition_epsilon(eps, delta, k)
    assert advanced_composition_epsilon(eps, delta, 2 * k) < base
    assert advanced_composition_epsilon(eps, delta / 2, k) < base


def test_composed_privacy_forward_form():
    eps, delta = composed_privacy(0.01, 0.0, 100, 1e-6)
    expected = math.sqrt(2 * 100 * math.log(1e6)) * 0.01 \
        + 100 * 0.01 * (math.exp(0.01) - 1)
    assert eps == pytest.approx(expected, rel=1e-12)
    assert delta == pytest.approx(1e-6)


def test_sum_bound_trivial_points():
    assert laplace_sum_bound(1, 1.0, 2 / math.e) == pytest.approx(
        2.8284271247461903, abs=1e-12)
    assert laplace_sum_bound(4, 1.0, 2 / math.e) == pytest.approx(
        5.656854249492381, abs=1e-12)


def test_sum_bound_matches_formula_at_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 1000))
        b = float(rng.uniform(0.01, 10))
        gamma = float(rng.uniform(0.001, 0.999))
        expected = 2 * math.sqrt(2) * b * math.sqrt(n) * math.log(2 / gamma)
        assert laplace_sum_bound(n, b, gamma) == pytest.approx(expected, rel=1e-12)


def test_sum_bound_warns_outside_regime():
    with pytest.warns(UserWarning):
        laplace_sum_bound(1, 1.0, 0.5)  # 0.5 < 2/e
    with pytest.raises(ValueError):
        laplace_sum_bound(0, 1.0, 0.1)
    with pytest.raises(ValueError):
        laplace_sum_bound(4, -1.0, 0.1)


def test_sum_bound_monte_carlo_exceedance():
    rng = np.random.default_rng(2024)
    n, b, gamma = 64, 1.0, 0.05
    bound = laplace_sum_bound(n, b, gamma)
    sums = rng.laplace(0, b, size=(10_000, n)).sum(axis=1)
    assert (np.abs(sums) > bound).mean() <= gamma


def test_derive_seed_stable_and_distinct():
    assert derive_seed(42, 0) == derive_seed(42, 0)
    assert derive_seed(42, 0) != derive_seed(42, 1)
    assert derive_seed(42, 0, 1) != derive_seed(42, 1, 0)
    assert 0 <= derive_seed(2**64 - 1, 123) < 2**64
