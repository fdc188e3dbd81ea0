import math

import numpy as np
import pytest

from edmetrics import InputError, KernelConfig, gaussian_kernel_matrix, median_bandwidth, \
    pairwise_distances
from edmetrics.diversity import mean_kernel_densities
from edmetrics.kernel import block_sq_distances, pick_block_rows, run_blocks, sq_norms

from oracles import naive_kernel_matrix, naive_pairwise_distances


class TestPairwiseDistances:
    def test_three_four_five_triangle(self):
        d = pairwise_distances(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert d[0, 1] == pytest.approx(5.0, abs=0)
        assert d[1, 0] == d[0, 1]

    def test_zero_diagonal(self):
        rng = np.random.default_rng(0)
        d = pairwise_distances(rng.standard_normal((10, 3)))
        assert np.all(np.diag(d) == 0.0)

    def test_one_dimensional_points(self):
        d = pairwise_distances(np.array([[0.0], [1.0], [3.0]]))
        off = sorted([d[0, 1], d[0, 2], d[1, 2]])
        assert off == [1.0, 2.0, 3.0]

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(1)
        d = pairwise_distances(rng.standard_normal((57, 5)))
        assert np.array_equal(d, d.T)

    def test_matches_naive(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((30, 4))
        np.testing.assert_allclose(pairwise_distances(X), naive_pairwise_distances(X),
                                   atol=1e-12)

    def test_refuses_huge_dense_matrix(self):
        with pytest.raises(InputError, match="refusing"):
            pairwise_distances(np.zeros((30, 2)), max_rows=10)


class TestGaussianKernel:
    def test_self_similarity_is_one_unnormalized(self):
        rng = np.random.default_rng(3)
        k = gaussian_kernel_matrix(rng.standard_normal((8, 2)), KernelConfig(0.7))
        assert np.all(np.diag(k) == 1.0)

    def test_closed_form_at_sqrt2(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])  # distance sqrt(2)
        k = gaussian_kernel_matrix(X, KernelConfig(1.0))
        assert k[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_normalized_prefactor_2d(self):
        X = np.zeros((2, 2))
        k = gaussian_kernel_matrix(X, KernelConfig(1.0, "normalized"))
        assert k[0, 0] == pytest.approx(1.0 / (2 * math.pi), abs=1e-12)

    def test_monotone_in_distance(self):
        for convention in ("unnormalized", "normalized"):
            cfg = KernelConfig(0.5, convention)
            X = np.array([[0.0], [0.3], [1.0]])
            k = gaussian_kernel_matrix(X, cfg)
            assert k[0, 1] > k[0, 2]

    def test_scaling_invariance_exact_for_power_of_two(self):
        # scaling features by c and sigma by c leaves the unnormalized kernel
        # unchanged; with c = 2 this is even bit-exact
        rng = np.random.default_rng(4)
        X = rng.standard_normal((12, 3))
        k1 = gaussian_kernel_matrix(X, KernelConfig(0.7))
        k2 = gaussian_kernel_matrix(2.0 * X, KernelConfig(1.4))
        assert np.array_equal(k1, k2)

    def test_matches_naive_both_conventions(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((25, 6))
        for convention in ("unnormalized", "normalized"):
            k = gaussian_kernel_matrix(X, KernelConfig(0.9, convention))
            np.testing.assert_allclose(
                k, naive_kernel_matrix(X, 0.9, convention), atol=1e-12
            )

    def test_invalid_sigma(self):
        with pytest.raises(InputError):
            KernelConfig(0.0)
        with pytest.raises(InputError):
            KernelConfig(1.0, "bogus")


class TestMedianBandwidth:
    def test_three_points_median_of_three_distances(self):
        X = np.array([[0.0], [1.0], [3.0]])  # distances {1, 2, 3}
        assert median_bandwidth(X) == 2.0

    def test_single_pair(self):
        X = np.array([[0.0], [7.0]])
        assert median_bandwidth(X) == 7.0

    def test_lower_median_for_even_counts(self):
        X = np.array([[0.0], [1.0], [3.0], [6.0]])
        # distances {1, 2, 3, 3, 5, 6}; lower median is the 3rd smallest
        assert median_bandwidth(X) == 3.0

    def test_identical_rows_degenerate(self):
        with pytest.raises(InputError, match="degenerate"):
            median_bandwidth(np.ones((5, 2)))

    def test_single_row_rejected(self):
        with pytest.raises(InputError, match="at least 2"):
            median_bandwidth(np.ones((1, 2)))


class TestBlockedEvaluation:
    def test_blocked_densities_equal_naive_per_entry(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((123, 7))
        cfg = KernelConfig(0.8)
        naive = naive_kernel_matrix(X, 0.8).mean(axis=1)
        for block_rows in (7, 32, 123, 1000):
            p = mean_kernel_densities(X, cfg, block_rows=block_rows)
            np.testing.assert_allclose(p, naive, atol=1e-12)

    def test_thread_count_does_not_change_bytes(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((500, 16))
        cfg = KernelConfig(0.3)
        base = mean_kernel_densities(X, cfg, block_rows=64, threads=1)
        for threads in (2, 4):
            other = mean_kernel_densities(X, cfg, block_rows=64, threads=threads)
            assert base.tobytes() == other.tobytes()

    def test_block_diagonal_exactly_zero(self):
        # catastrophic-cancellation guard: the true diagonal is pinned to 0
        rng = np.random.default_rng(8)
        X = rng.standard_normal((40, 5)) * 1e3
        norms = sq_norms(X)
        d2 = block_sq_distances(X, slice(0, 40), slice(0, 40), norms)
        assert np.all(np.diag(d2) == 0.0)
        d2 = block_sq_distances(X, slice(10, 30), slice(20, 40), norms)
        for i in range(20, 30):
            assert d2[i - 10, i - 20] == 0.0

    def test_run_blocks_order_independent_of_threads(self):
        def worker(rows):
            return np.arange(rows.start, rows.stop, dtype=float)

        a = run_blocks(1000, 64, worker, threads=1)
        b = run_blocks(1000, 64, worker, threads=3)
        assert np.array_equal(a, np.arange(1000, dtype=float))
        assert a.tobytes() == b.tobytes()

    def test_pick_block_rows_respects_budget(self):
        assert pick_block_rows(10**6, 1536, memory_budget_mb=64.0) <= 2048
        assert pick_block_rows(10, 4, memory_budget_mb=64.0) == 10
