"""Diversity entropy: a Parzen-window differential-entropy estimate.

The estimate places a Gaussian kernel on every sample, evaluates the mean
kernel density at each sample, and averages the negative log densities:

    H = -(1/n) sum_i ln( (1/n) sum_j K_sigma(x_i, x_j) + eps )

Natural logarithm throughout.  Under the unnormalized kernel the value lies in
[0, ln n]; the normalized kernel shifts both bounds by the log prefactor.

Exact evaluation is O(n^2 D) and runs block-wise: no n x n intermediate is
ever materialized, and the accumulation order is fixed so results do not
depend on the worker-thread count.  Three approximations trade accuracy for
speed: subsampling, kernel truncation at a distance cutoff, and restriction
to k nearest neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernel import (
    DEFAULT_MEMORY_BUDGET_MB,
    KernelConfig,
    as_array,
    block_sq_distances,
    iter_blocks,
    pick_block_rows,
    run_blocks,
    sq_norms,
)
from .manifest import FeatureMatrix

DEFAULT_EPSILON = 1e-12

_BOUNDS_TOL = 1e-9


@dataclass(frozen=True)
class EntropyResult:
    """Entropy value in nats plus the settings that produced it."""

    value: float
    n: int
    sigma: float
    convention: str
    method: str
    bounds: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.bounds
        if not (lo - _BOUNDS_TOL <= self.value <= hi + _BOUNDS_TOL):
            raise InputError(
                f"entropy {self.value!r} outside bounds [{lo!r}, {hi!r}] (method={self.method})"
            )


def entropy_bounds(n: int, dim: int, cfg: KernelConfig) -> tuple[float, float]:
    """Closed-form range of the estimator: [-ln K(0), -ln K(0) + ln n].

    The lower bound is attained when all samples coincide, the upper when all
    samples are mutually far apart relative to sigma.
    """
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    lo = 0.0 - cfg.log_prefactor(dim)  # 0.0 (not -0.0) under the unnormalized kernel
    return (lo, lo + math.log(n))


def mean_kernel_densities(
    X: FeatureMatrix | np.ndarray,
    cfg: KernelConfig,
    tau: float | None = None,
    block_rows: int | None = None,
    memory_budget_mb: float = DEFAULT_MEMORY_BUDGET_MB,
    threads: int = 1,
) -> np.ndarray:
    """(1/n) sum_j K(x_i, x_j) for every i, as float64, computed block-wise.

    With ``tau`` set, pairs farther apart than tau contribute zero.  The
    prefactor of the normalized convention is applied.  Column blocks are
    accumulated sequentially per row block, so the result is independent of
    ``threads``.
    """
    X = as_array(X)
    n, dim = X.shape
    inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma**2)
    tau_sq = None if tau is None else float(tau) ** 2
    norms = sq_norms(X)
    block = block_rows or pick_block_rows(n, dim, memory_budget_mb)

    def worker(rows: slice) -> np.ndarray:
        acc = np.zeros(rows.stop - rows.start, dtype=np.float64)
        for cols in iter_blocks(n, block):
            d2 = block_sq_distances(X, rows, cols, norms)
            k = np.exp(d2 * -inv_two_sigma_sq)
            if tau_sq is not None:
                k[d2 > tau_sq] = 0.0
            acc += k.sum(axis=1, dtype=np.float64)
        return acc

    sums = run_blocks(n, block, worker, threads=threads)
    pref = cfg.prefactor(dim)
    return sums * (pref / n)


def _entropy_value(densities: np.ndarray, epsilon: float) -> float:
    return float(-np.mean(np.log(densities + epsilon)))


def diversity_entropy(
    X: FeatureMatrix | np.ndarray,
    cfg: KernelConfig,
    epsilon: float = DEFAULT_EPSILON,
    block_rows: int | None = None,
    memory_budget_mb: float = DEFAULT_MEMORY_BUDGET_MB,
    threads: int = 1,
) -> EntropyResult:
    """Exact Parzen-window diversity entropy of a feature matrix."""
    X = as_array(X)
    p = mean_kernel_densities(
        X, cfg, block_rows=block_rows, memory_budget_mb=memory_budget_mb, threads=threads
    )
    return EntropyResult(
        value=_entropy_value(p, epsilon),
        n=X.shape[0],
        sigma=cfg.sigma,
        convention=cfg.convention,
        method="exact",
        bounds=entropy_bounds(X.shape[0], X.shape[1], cfg),
    )


def diversity_entropy_subsampled(
    X: FeatureMatrix | np.ndarray,
    cfg: KernelConfig,
    m: int,
    repeats: int = 8,
    seed: int = 0,
    epsilon: float = DEFAULT_EPSILON,
    **block_kwargs,
) -> EntropyResult:
    """Mean entropy over ``repeats`` uniform subsets of m rows (no replacement).

    Deterministic for a fixed seed; m = n reproduces the exact value because
    the sampled indices are used in sorted order.
    """
    X = as_array(X)
    n = X.shape[0]
    if not 1 <= m <= n:
        raise InputError(f"subsample size m={m} must be in [1, {n}]")
    if repeats < 1:
        raise InputError(f"repeats must be >= 1, got {repeats}")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(1 if m == n else repeats):  # the full set has no sampling noise
        idx = np.sort(rng.choice(n, size=m, replace=False))
        p = mean_kernel_densities(X[idx], cfg, **block_kwargs)
        values.append(_entropy_value(p, epsilon))
    return EntropyResult(
        value=float(np.mean(values)) if len(values) > 1 else values[0],
        n=m,
        sigma=cfg.sigma,
        convention=cfg.convention,
        method="subsampled",
        bounds=entropy_bounds(m, X.shape[1], cfg),
    )


def diversity_entropy_truncated(
    X: FeatureMatrix | np.ndarray,
    cfg: KernelConfig,
    tau: float,
    epsilon: float = DEFAULT_EPSILON,
    **block_kwargs,
) -> EntropyResult:
    """Entropy with kernel contributions beyond distance tau discarded.

    Dropping positive mass can only lower densities, so the result is >= the
    exact value; it equals it once tau covers the largest pairwise distance.
    """
    if tau <= 0:
        raise InputError(f"tau must be > 0, got {tau}")
    X = as_array(X)
    p = mean_kernel_densities(X, cfg, tau=tau, **block_kwargs)
    return EntropyResult(
        value=_entropy_value(p, epsilon),
        n=X.shape[0],
        sigma=cfg.sigma,
        convention=cfg.convention,
        method="truncated",
        bounds=entropy_bounds(X.shape[0], X.shape[1], cfg),
    )


def diversity_entropy_knn(
    X: FeatureMatrix | np.ndarray,
    cfg: KernelConfig,
    k: int,
    epsilon: float = DEFAULT_EPSILON,
    block_rows: int | None = None,
    memory_budget_mb: float = DEFAULT_MEMORY_BUDGET_MB,
    threads: int = 1,
) -> EntropyResult:
    """Entropy with each density restricted to the k nearest neighbors.

    Self counts as a neighbor, so k = 1 keeps only the self term (giving
    ln n under the unnormalized kernel) and k = n reproduces the exact value.
    Neighbor search is exact via per-stripe selection.
    """
    X = as_array(X)
    n, dim = X.shape
    if not 1 <= k <= n:
        raise InputError(f"k={k} must be in [1, {n}]")
    if k == n:
        p = mean_kernel_densities(
            X, cfg, block_rows=block_rows, memory_budget_mb=memory_budget_mb, threads=threads
        )
    else:
        inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma**2)
        norms = sq_norms(X)
        # each worker needs a full (block x n) stripe to select neighbors from
        budget = max(memory_budget_mb, 1.0) * 2**20
        block = block_rows or max(16, min(n, int(budget / (32.0 * n))))

        def worker(rows: slice) -> np.ndarray:
            d2 = block_sq_distances(X, rows, slice(0, n), norms)
            nearest = np.argpartition(d2, k - 1, axis=1)[:, :k]
            d2_sel = np.take_along_axis(d2, nearest, axis=1)
            return np.exp(d2_sel * -inv_two_sigma_sq).sum(axis=1, dtype=np.float64)

        sums = run_blocks(n, block, worker, threads=threads)
        p = sums * (cfg.prefactor(dim) / n)
    return EntropyResult(
        value=_entropy_value(p, epsilon),
        n=n,
        sigma=cfg.sigma,
        convention=cfg.convention,
        method="knn",
        bounds=entropy_bounds(n, dim, cfg),
    )
