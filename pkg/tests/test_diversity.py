import math

import numpy as np
import pytest

from edmetrics import (
    InputError,
    KernelConfig,
    diversity_entropy,
    diversity_entropy_knn,
    diversity_entropy_subsampled,
    diversity_entropy_truncated,
    entropy_bounds,
)
from edmetrics.validation import ClusterSpec, SyntheticSpec, generate_synthetic

from oracles import naive_entropy


def well_separated(n, dim=None, scale=10.0):
    """n rows pairwise >= scale apart (orthogonal scaled basis vectors)."""
    dim = dim or n
    return np.eye(n, dim) * scale


def five_clusters(n_per=1000, dim=8, spread=0.05, seed=42):
    clusters = [
        ClusterSpec(center=np.eye(5, dim)[k] * 1.2, spread=spread, count=n_per,
                    task_id=k, mean_length=3)
        for k in range(5)
    ]
    X, _ = generate_synthetic(SyntheticSpec(clusters=clusters, seed=seed))
    return X.data


class TestExactEntropy:
    def test_fifty_distant_samples_hit_log_n(self):
        cfg = KernelConfig(0.1)
        result = diversity_entropy(well_separated(50, scale=1.0), cfg)  # 1.0 = 10 sigma
        assert result.value == pytest.approx(math.log(50), abs=1e-3)
        assert result.value == pytest.approx(3.9120, abs=1e-3)

    def test_identical_samples_give_zero(self):
        cfg = KernelConfig(0.1)
        result = diversity_entropy(np.ones((20, 4)), cfg)
        assert result.value == pytest.approx(0.0, abs=1e-9)

    def test_two_points_at_half_kernel_distance(self):
        sigma = 0.4
        d = sigma * math.sqrt(2 * math.log(2))  # K(d) = 0.5
        X = np.array([[0.0], [d]])
        result = diversity_entropy(X, KernelConfig(sigma))
        assert result.value == pytest.approx(-math.log(0.75), abs=1e-9)
        assert result.value == pytest.approx(0.287682, abs=1e-6)

    def test_single_sample(self):
        result = diversity_entropy(np.ones((1, 3)), KernelConfig(1.0))
        assert result.value == pytest.approx(0.0, abs=1e-9)
        assert result.bounds == (0.0, 0.0)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(0)
        X = rng.normal(0, 0.3, size=(150, 5))
        value = diversity_entropy(X, KernelConfig(0.25), block_rows=32).value
        assert value == pytest.approx(naive_entropy(X, 0.25), abs=1e-10)

    def test_matches_naive_oracle_normalized(self):
        rng = np.random.default_rng(1)
        X = rng.normal(0, 0.3, size=(80, 4))
        value = diversity_entropy(X, KernelConfig(0.25, "normalized")).value
        assert value == pytest.approx(naive_entropy(X, 0.25, "normalized"), abs=1e-10)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((200, 6))
        cfg = KernelConfig(0.5)
        base = diversity_entropy(X, cfg, block_rows=37).value
        for seed in range(5):
            perm = np.random.default_rng(seed).permutation(200)
            assert abs(diversity_entropy(X[perm], cfg, block_rows=37).value - base) < 1e-10

    def test_monotone_in_sigma(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((60, 4))
        sigmas = [0.05, 0.1, 0.3, 1.0, 3.0]
        values = [diversity_entropy(X, KernelConfig(s)).value for s in sigmas]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestBounds:
    def test_unnormalized_bounds(self):
        assert entropy_bounds(50, 3, KernelConfig(0.1)) == (0.0, math.log(50))
        assert entropy_bounds(1, 3, KernelConfig(0.1)) == (0.0, 0.0)

    def test_normalized_bounds_closed_form(self):
        lo, hi = entropy_bounds(10, 2, KernelConfig(1.0, "normalized"))
        assert lo == pytest.approx(math.log(2 * math.pi), abs=1e-12)
        assert hi == pytest.approx(math.log(2 * math.pi) + math.log(10), abs=1e-12)
        assert (lo, hi) == (pytest.approx(1.837877, abs=1e-6),
                            pytest.approx(4.140462, abs=1e-6))

    def test_bounds_hold_on_random_matrices(self):
        rng = np.random.default_rng(4)
        for _ in range(40):
            n = int(rng.integers(2, 120))
            dim = int(rng.integers(1, 24))
            X = rng.uniform(-1, 1, size=(n, dim))
            sigma = float(rng.uniform(0.05, 0.35))
            for convention in ("unnormalized", "normalized"):
                r = diversity_entropy(X, KernelConfig(sigma, convention))
                lo, hi = r.bounds
                assert lo - 1e-9 <= r.value <= hi + 1e-9

    def test_result_outside_bounds_rejected(self):
        from edmetrics.diversity import EntropyResult
        with pytest.raises(InputError, match="outside bounds"):
            EntropyResult(value=5.0, n=10, sigma=0.1, convention="unnormalized",
                          method="exact", bounds=(0.0, math.log(10)))


class TestDirectionalBehaviors:
    """Sample-change effects on the entropy, on synthetic clusters."""

    @pytest.mark.parametrize("seed", range(5))
    def test_far_sample_increases_entropy(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 0.2, size=(40, 4))
        cfg = KernelConfig(0.1)
        far = X.max(axis=0) + 10 * cfg.sigma
        base = diversity_entropy(X, cfg).value
        grown = diversity_entropy(np.vstack([X, far]), cfg).value
        assert grown > base

    @pytest.mark.parametrize("seed", range(5))
    def test_duplicate_decreases_entropy(self, seed):
        # a tightly clustered duplicate sits in a region at least as dense as
        # average; duplicating an isolated outlier instead can raise the value
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 0.2, size=(40, 4))
        cfg = KernelConfig(0.1)
        from edmetrics.diversity import mean_kernel_densities
        densest = int(np.argmax(mean_kernel_densities(X, cfg)))
        base = diversity_entropy(X, cfg).value
        grown = diversity_entropy(np.vstack([X, X[densest]]), cfg).value
        assert grown < base

    @pytest.mark.parametrize("seed", range(5))
    def test_cluster_moves(self, seed):
        cfg = KernelConfig(0.1)
        rng = np.random.default_rng(seed)
        a = rng.normal(0, 0.03, size=(25, 4))
        b = rng.normal(0, 0.03, size=(25, 4))
        b[:, 0] += 0.3  # centers 3 sigma apart
        base = diversity_entropy(np.vstack([a, b]), cfg).value
        closer = b.copy()
        closer[:, 0] -= 0.15
        apart = b.copy()
        apart[:, 0] += 0.3
        assert diversity_entropy(np.vstack([a, closer]), cfg).value < base
        assert diversity_entropy(np.vstack([a, apart]), cfg).value > base


class TestSubsampled:
    def test_full_subsample_equals_exact(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((50, 3))
        cfg = KernelConfig(0.5)
        exact = diversity_entropy(X, cfg).value
        sub = diversity_entropy_subsampled(X, cfg, m=50, repeats=3, seed=0).value
        assert sub == exact

    def test_deterministic_under_seed(self):
        X = five_clusters(n_per=60)
        cfg = KernelConfig(0.1)
        a = diversity_entropy_subsampled(X, cfg, m=40, repeats=4, seed=123)
        b = diversity_entropy_subsampled(X, cfg, m=40, repeats=4, seed=123)
        assert a.value == b.value

    def test_clustered_data_within_five_percent(self):
        X = five_clusters(n_per=400)  # n = 2000
        cfg = KernelConfig(0.1)
        exact = diversity_entropy(X, cfg).value
        sub = diversity_entropy_subsampled(X, cfg, m=200, repeats=8, seed=0).value
        assert abs(sub - exact) / exact < 0.05

    def test_m_out_of_range(self):
        X = np.ones((5, 2))
        with pytest.raises(InputError):
            diversity_entropy_subsampled(X, KernelConfig(1.0), m=6)


class TestTruncated:
    def test_tau_beyond_max_distance_equals_exact(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((40, 3))
        cfg = KernelConfig(0.5)
        exact = diversity_entropy(X, cfg).value
        trunc = diversity_entropy_truncated(X, cfg, tau=1e6).value
        assert trunc == exact

    def test_tiny_tau_keeps_only_self_terms(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((30, 3))
        result = diversity_entropy_truncated(X, KernelConfig(0.5), tau=1e-12)
        assert result.value == pytest.approx(math.log(30), abs=1e-9)

    def test_truncated_value_at_least_exact(self):
        X = five_clusters(n_per=100)
        cfg = KernelConfig(0.1)
        exact = diversity_entropy(X, cfg).value
        for tau in (0.2, 0.5, 1.0):
            assert diversity_entropy_truncated(X, cfg, tau=tau).value >= exact

    def test_five_sigma_truncation_within_one_percent(self):
        X = five_clusters(n_per=400)
        cfg = KernelConfig(0.1)
        exact = diversity_entropy(X, cfg).value
        trunc = diversity_entropy_truncated(X, cfg, tau=5 * 0.1).value
        assert abs(trunc - exact) / exact < 0.01

    def test_invalid_tau(self):
        with pytest.raises(InputError):
            diversity_entropy_truncated(np.ones((3, 2)), KernelConfig(1.0), tau=0.0)


class TestKnn:
    def test_k_equals_n_matches_exact(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((40, 3))
        cfg = KernelConfig(0.5)
        assert diversity_entropy_knn(X, cfg, k=40).value == diversity_entropy(X, cfg).value

    def test_k_one_gives_log_n(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((25, 3))
        result = diversity_entropy_knn(X, KernelConfig(0.5), k=1)
        assert result.value == pytest.approx(math.log(25), abs=1e-9)

    def test_cluster_sized_k_within_one_percent(self):
        X = five_clusters(n_per=400)
        cfg = KernelConfig(0.1)
        exact = diversity_entropy(X, cfg).value
        knn = diversity_entropy_knn(X, cfg, k=400).value
        assert abs(knn - exact) / exact < 0.01

    def test_blocked_knn_matches_unblocked(self):
        X = five_clusters(n_per=80)
        cfg = KernelConfig(0.1)
        a = diversity_entropy_knn(X, cfg, k=80, block_rows=17)
        b = diversity_entropy_knn(X, cfg, k=80, block_rows=4000)
        assert a.value == pytest.approx(b.value, abs=1e-12)

    def test_invalid_k(self):
        with pytest.raises(InputError):
            diversity_entropy_knn(np.ones((4, 2)), KernelConfig(1.0), k=0)
        with pytest.raises(InputError):
            diversity_entropy_knn(np.ones((4, 2)), KernelConfig(1.0), k=5)


def test_float32_input_stays_accurate_at_loose_tolerance():
    rng = np.random.default_rng(10)
    X = rng.normal(0, 0.3, size=(100, 8)).astype(np.float32)
    value32 = diversity_entropy(X, KernelConfig(0.25)).value
    value64 = diversity_entropy(X.astype(np.float64), KernelConfig(0.25)).value
    assert value32 == pytest.approx(value64, abs=1e-3)
