"""Pairwise-distance and Gaussian-kernel primitives.

Two kernel conventions are supported:

* ``unnormalized``: K(d) = exp(-d^2 / 2 sigma^2), so K(0) = 1 (default);
* ``normalized``:   the density form (2 pi sigma^2)^(-D/2) exp(-d^2 / 2 sigma^2).

Large inputs are handled by block-wise evaluation: distances are produced one
row-block stripe at a time, column blocks accumulated sequentially in index
order.  Because every row's reduction runs in the same order regardless of how
row blocks are distributed over worker threads, results are bit-identical for
any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.spatial.distance import pdist

from .errors import InputError
from .manifest import FeatureMatrix

# Refuse to build dense n x n matrices beyond this size; the blocked paths
# exist precisely so that large datasets never materialize them.
MAX_DENSE_ROWS = 20_000

DEFAULT_MEMORY_BUDGET_MB = 512.0


@dataclass(frozen=True)
class KernelConfig:
    sigma: float
    convention: str = "unnormalized"

    def __post_init__(self):
        if self.sigma <= 0:
            raise InputError(f"sigma must be > 0, got {self.sigma}")
        if self.convention not in ("unnormalized", "normalized"):
            raise InputError(f"unknown kernel convention: {self.convention!r}")

    def log_prefactor(self, dim: int) -> float:
        """ln of the kernel value at distance 0."""
        if self.convention == "unnormalized":
            return 0.0
        return -0.5 * dim * math.log(2.0 * math.pi * self.sigma**2)

    def prefactor(self, dim: int) -> float:
        return math.exp(self.log_prefactor(dim))


def as_array(X: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Accept either a FeatureMatrix or a raw 2-D array of finite floats."""
    if isinstance(X, FeatureMatrix):
        return X.data
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"expected a 2-D feature array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if not np.isfinite(arr).all():
        raise InputError("feature array contains non-finite values")
    return arr


def sq_norms(X: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", X, X)


def block_sq_distances(
    X: np.ndarray,
    rows: slice,
    cols: slice,
    norms: np.ndarray,
) -> np.ndarray:
    """Squared Euclidean distances between two row ranges of X.

    Uses the |a|^2 + |b|^2 - 2 a.b expansion with a GEMM for the cross term,
    carried out in the input precision (float32 input stays float32).
    Negatives from round-off are clipped and the true diagonal (where the row
    and column ranges overlap) is set to exactly zero.
    """
    g = X[rows] @ X[cols].T
    g *= -2.0
    g += norms[rows, None]
    g += norms[None, cols]
    np.maximum(g, 0.0, out=g)
    lo = max(rows.start, cols.start)
    hi = min(rows.stop, cols.stop)
    if lo < hi:
        idx = np.arange(lo, hi)
        g[idx - rows.start, idx - cols.start] = 0.0
    return g


def iter_blocks(n: int, block: int) -> Iterator[slice]:
    for start in range(0, n, block):
        yield slice(start, min(start + block, n))


def pick_block_rows(n: int, dim: int, memory_budget_mb: float) -> int:
    """Row-block size such that one stripe's temporaries stay inside the budget.

    A stripe costs roughly 3 float64 copies of a (block x block) tile plus the
    GEMM output; we size conservatively at 4 x 8 bytes per element.
    """
    budget = max(memory_budget_mb, 1.0) * 2**20
    block = int(math.sqrt(budget / 32.0))
    return min(n, max(64, block))


def run_blocks(
    n: int,
    block_rows: int,
    worker: Callable[[slice], np.ndarray],
    threads: int = 1,
) -> np.ndarray:
    """Apply ``worker`` to each row block and concatenate results in index order.

    Blocks are independent; outputs are stitched by block index so the result
    is byte-identical for every thread count.
    """
    blocks = list(iter_blocks(n, block_rows))
    if threads <= 1 or len(blocks) == 1:
        parts = [worker(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(worker, blocks))
    return np.concatenate(parts)


def pairwise_distances(X: FeatureMatrix | np.ndarray, max_rows: int = MAX_DENSE_ROWS) -> np.ndarray:
    """Dense n x n Euclidean distance matrix.

    Exactly symmetric (each unordered pair is computed once and mirrored) with
    a zero diagonal.  Refuses n > max_rows; use the blocked entry points for
    large datasets.
    """
    X = as_array(X)
    n = X.shape[0]
    if n > max_rows:
        raise InputError(
            f"refusing to materialize a {n}x{n} distance matrix (max_rows={max_rows})"
        )
    norms = sq_norms(X.astype(np.float64, copy=False))
    d2 = block_sq_distances(X, slice(0, n), slice(0, n), norms)
    d = np.sqrt(d2)
    # mirror the upper triangle so d[j, i] is bit-identical to d[i, j]
    for b in iter_blocks(n, 1024):
        d[b.start:b.stop, :b.start] = d[:b.start, b.start:b.stop].T
        tri = np.tril_indices(b.stop - b.start, k=-1)
        d[b.start:b.stop, b.start:b.stop][tri] = d[b.start:b.stop, b.start:b.stop].T[tri]
    return d


def gaussian_kernel_matrix(
    X: FeatureMatrix | np.ndarray,
    cfg: KernelConfig,
    max_rows: int = MAX_DENSE_ROWS,
) -> np.ndarray:
    """Dense kernel matrix K[i, j] = prefactor * exp(-d_ij^2 / 2 sigma^2)."""
    X = as_array(X)
    d = pairwise_distances(X, max_rows=max_rows)
    k = np.exp(d**2 / (-2.0 * cfg.sigma**2))
    pref = cfg.prefactor(X.shape[1])
    return k if pref == 1.0 else pref * k


def median_bandwidth(X: FeatureMatrix | np.ndarray, max_rows: int = MAX_DENSE_ROWS) -> float:
    """Median of the n(n-1)/2 pairwise distances (lower median for even counts)."""
    X = as_array(X)
    n = X.shape[0]
    if n < 2:
        raise InputError(f"median bandwidth needs at least 2 rows, got {n}")
    if n > max_rows:
        raise InputError(
            f"refusing to compute {n * (n - 1) // 2} pairwise distances (max_rows={max_rows})"
        )
    d = pdist(np.asarray(X, dtype=np.float64))
    m = d.shape[0]
    k = (m - 1) // 2
    med = float(np.partition(d, k)[k])
    if med <= 0.0:
        raise InputError("degenerate bandwidth: median pairwise distance is 0")
    return med
