"""Training-free learnability scoring.

Per task t the pipeline computes:

* ease of memorization  E_t = mean pairwise kernel similarity / ln(1 + mean length);
  identical samples give the maximum 1/ln(1+L), mutually distant samples the
  minimum 1/(N ln(1+L));
* expressiveness        R_t = H_t * C_t, the eigen-share entropy of the sample
  covariance (directional coverage) times N_t * tanh(mean pairwise distance / sigma)
  (spatial coverage);
* raw learnability      L_t = R_t^beta * E_t^(1-beta);
* task prior            pi_t = tanh(N_t / (N_total * sigma_model));
* transfer              I[i, t] = exp(-|mu_i - mu_t|^2 / 2 sigma_center^2).

The adjusted score is pi_t * sum_i I[i, t] * L_i and the dataset score is the
mean of the adjusted scores over tasks (ascending task id).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernel import (
    KernelConfig,
    as_array,
    block_sq_distances,
    iter_blocks,
    pick_block_rows,
    run_blocks,
    sq_norms,
)
from .diversity import mean_kernel_densities
from .manifest import DatasetManifest, FeatureMatrix, Hyperparams

DEFAULT_VARIANCE_FLOOR = 1e-18


@dataclass(frozen=True)
class TaskGroup:
    """Rows of one task plus its mean episode length and centroid."""

    task_id: int
    row_indices: np.ndarray
    mean_length: float
    centroid: np.ndarray

    def __post_init__(self):
        if self.row_indices.size == 0:
            raise InputError(f"task {self.task_id} has no samples")
        if self.mean_length < 1:
            raise InputError(f"task {self.task_id}: mean length {self.mean_length} < 1")


@dataclass(frozen=True)
class LearnabilityReport:
    """Per-task factors and the dataset-level score; tasks in ascending id order."""

    task_ids: np.ndarray
    counts: np.ndarray
    mean_lengths: np.ndarray
    ease: np.ndarray                 # E_t
    expressiveness: np.ndarray       # R_t
    directional: np.ndarray          # eigen-share entropy component of R_t
    spatial: np.ndarray              # N_t * tanh(mean distance / sigma) component
    mean_pair_distance: np.ndarray
    raw: np.ndarray                  # R^beta * E^(1-beta)
    priors: np.ndarray               # pi_t
    adjusted: np.ndarray
    transfer: np.ndarray             # T x T
    dataset_score: float

    def __post_init__(self):
        t = self.task_ids.shape[0]
        for name in (
            "counts", "mean_lengths", "ease", "expressiveness", "directional",
            "spatial", "mean_pair_distance", "raw", "priors", "adjusted",
        ):
            if getattr(self, name).shape != (t,):
                raise InputError(f"report field {name} has wrong shape")
        if self.transfer.shape != (t, t):
            raise InputError("transfer matrix shape mismatch")
        if not np.array_equal(self.transfer, self.transfer.T):
            raise InputError("transfer matrix must be symmetric")
        if not np.all(np.diag(self.transfer) == 1.0):
            raise InputError("transfer matrix must have a unit diagonal")
        if not math.isclose(self.dataset_score, float(np.mean(self.adjusted)), rel_tol=1e-12,
                            abs_tol=1e-300):
            raise InputError("dataset score is not the mean of adjusted task scores")

    def to_dict(self) -> dict:
        return {
            "dataset_score": self.dataset_score,
            "tasks": [
                {
                    "task_id": int(self.task_ids[i]),
                    "count": int(self.counts[i]),
                    "mean_length": float(self.mean_lengths[i]),
                    "ease": float(self.ease[i]),
                    "expressiveness": float(self.expressiveness[i]),
                    "directional": float(self.directional[i]),
                    "spatial": float(self.spatial[i]),
                    "mean_pair_distance": float(self.mean_pair_distance[i]),
                    "raw": float(self.raw[i]),
                    "prior": float(self.priors[i]),
                    "adjusted": float(self.adjusted[i]),
                }
                for i in range(self.task_ids.shape[0])
            ],
            "transfer": self.transfer.tolist(),
        }


def mean_pairwise_distance(X: FeatureMatrix | np.ndarray, threads: int = 1) -> float:
    """Mean Euclidean distance over unordered row pairs, block-wise."""
    X = as_array(X)
    n = X.shape[0]
    if n < 2:
        return 0.0
    norms = sq_norms(X.astype(np.float64, copy=False))
    block = pick_block_rows(n, X.shape[1], memory_budget_mb=256.0)

    def worker(rows: slice) -> np.ndarray:
        acc = np.zeros(rows.stop - rows.start, dtype=np.float64)
        for cols in iter_blocks(n, block):
            acc += np.sqrt(block_sq_distances(X, rows, cols, norms)).sum(axis=1)
        return acc

    total = float(run_blocks(n, block, worker, threads=threads).sum())
    return total / (n * (n - 1))


def memorization_ease(
    X_t: FeatureMatrix | np.ndarray,
    mean_length: float,
    sigma_task: float,
) -> float:
    """E_t: mean pairwise kernel similarity scaled by 1/ln(1 + mean length)."""
    X_t = as_array(X_t)
    if mean_length < 1:
        raise InputError(f"mean length must be >= 1, got {mean_length}")
    cfg = KernelConfig(sigma=sigma_task, convention="unnormalized")
    mean_kernel = float(np.mean(mean_kernel_densities(X_t, cfg)))
    return mean_kernel / math.log1p(mean_length)


def expressiveness(
    X_t: FeatureMatrix | np.ndarray,
    sigma_task: float,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
) -> tuple[float, float, float]:
    """(R_t, directional coverage, spatial coverage) for one task's rows.

    Directional coverage is the entropy of the covariance eigenvalue shares
    (unbiased N-1 denominator, zero eigenvalues contribute nothing); spatial
    coverage is N * tanh(mean pairwise distance / sigma).  Single samples and
    totally degenerate clouds score R = 0.
    """
    X_t = as_array(X_t).astype(np.float64, copy=False)
    if sigma_task <= 0:
        raise InputError(f"sigma_task must be > 0, got {sigma_task}")
    n, d = X_t.shape
    if n == 1:
        return 0.0, 0.0, 0.0
    d_bar = mean_pairwise_distance(X_t)
    coverage = n * math.tanh(d_bar / sigma_task)
    centered = X_t - X_t.mean(axis=0)
    if n - 1 >= d:
        cov = centered.T @ centered / (n - 1)
    else:
        # same nonzero spectrum from the smaller Gram matrix
        cov = centered @ centered.T / (n - 1)
    eigvals = np.clip(np.linalg.eigvalsh(cov), 0.0, None)
    total = float(eigvals.sum())
    if total < variance_floor:
        return 0.0, 0.0, coverage
    shares = eigvals[eigvals > 0.0] / total
    h_dir = float(-(shares * np.log(shares)).sum()) + 0.0  # never -0.0
    return h_dir * coverage, h_dir, coverage


def raw_learnability(expressive: float, ease: float, beta: float) -> float:
    """Geometric interpolation R^beta * E^(1-beta)."""
    if not 0.0 <= beta <= 1.0:
        raise InputError(f"beta must be in [0, 1], got {beta}")
    if expressive < 0:
        raise InputError(f"expressiveness must be >= 0, got {expressive}")
    if ease <= 0:
        raise InputError(f"ease must be > 0, got {ease}")
    if beta == 0.0:
        return ease
    if beta == 1.0:
        return expressive
    return expressive**beta * ease ** (1.0 - beta)


def task_priors(counts, sigma_model: float) -> np.ndarray:
    """pi_t = tanh(N_t / (N_total * sigma_model)) per task."""
    counts = np.asarray(counts, dtype=np.float64)
    if sigma_model <= 0:
        raise InputError(f"sigma_model must be > 0, got {sigma_model}")
    if np.any(counts < 0):
        raise InputError("task counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise InputError("total sample count must be > 0")
    return np.tanh(counts / (total * sigma_model))


def task_transfer_matrix(centroids, sigma_center: float) -> np.ndarray:
    """Gaussian kernel between task centroids: symmetric with unit diagonal."""
    if sigma_center <= 0:
        raise InputError(f"sigma_center must be > 0, got {sigma_center}")
    c = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    t = c.shape[0]
    d2 = block_sq_distances(c, slice(0, t), slice(0, t), sq_norms(c))
    transfer = np.exp(d2 / (-2.0 * sigma_center**2))
    upper = np.triu(transfer)
    transfer = upper + np.triu(transfer, 1).T
    np.fill_diagonal(transfer, 1.0)
    return transfer


def adjusted_learnability(raw, transfer, priors) -> tuple[np.ndarray, float]:
    """(adjusted per-task scores, dataset mean): adj[t] = pi_t * sum_i I[i,t] raw[i]."""
    raw = np.asarray(raw, dtype=np.float64)
    priors = np.asarray(priors, dtype=np.float64)
    transfer = np.asarray(transfer, dtype=np.float64)
    t = raw.shape[0]
    if priors.shape != (t,) or transfer.shape != (t, t):
        raise InputError(
            f"dimension mismatch: raw {raw.shape}, priors {priors.shape}, "
            f"transfer {transfer.shape}"
        )
    adjusted = priors * (transfer.T @ raw)
    return adjusted, float(np.mean(adjusted))


def group_tasks(manifest: DatasetManifest, X: FeatureMatrix | np.ndarray) -> list[TaskGroup]:
    """Group feature rows by task id (ascending); every task must be nonempty."""
    X = as_array(X)
    if X.shape[0] != manifest.n_episodes:
        raise InputError(
            f"row/manifest mismatch: {X.shape[0]} feature rows, "
            f"{manifest.n_episodes} episodes"
        )
    task_ids = manifest.task_ids()
    lengths = manifest.lengths()
    groups = []
    for t in range(manifest.task_count):
        idx = np.flatnonzero(task_ids == t)
        if idx.size == 0:
            raise InputError(f"empty task: no episodes carry task_id {t}")
        groups.append(
            TaskGroup(
                task_id=t,
                row_indices=idx,
                mean_length=float(lengths[idx].mean()),
                centroid=X[idx].astype(np.float64, copy=False).mean(axis=0),
            )
        )
    return groups


def learnability_report(
    manifest: DatasetManifest,
    X: FeatureMatrix | np.ndarray,
    hp: Hyperparams | None = None,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
) -> LearnabilityReport:
    """Full per-task and dataset-level learnability scores."""
    hp = hp or Hyperparams()
    X = as_array(X)
    groups = group_tasks(manifest, X)
    t_count = len(groups)
    ease = np.empty(t_count)
    expr = np.empty(t_count)
    direc = np.empty(t_count)
    spati = np.empty(t_count)
    dbar = np.empty(t_count)
    raw = np.empty(t_count)
    for i, g in enumerate(groups):
        rows = X[g.row_indices]
        ease[i] = memorization_ease(rows, g.mean_length, hp.sigma_task)
        expr[i], direc[i], spati[i] = expressiveness(rows, hp.sigma_task, variance_floor)
        dbar[i] = mean_pairwise_distance(rows)
        raw[i] = raw_learnability(expr[i], ease[i], hp.beta)
    counts = np.array([g.row_indices.size for g in groups], dtype=np.int64)
    priors = task_priors(counts, hp.sigma_model)
    transfer = task_transfer_matrix(np.stack([g.centroid for g in groups]), hp.sigma_center)
    adjusted, dataset_score = adjusted_learnability(raw, transfer, priors)
    return LearnabilityReport(
        task_ids=np.array([g.task_id for g in groups], dtype=np.int64),
        counts=counts,
        mean_lengths=np.array([g.mean_length for g in groups]),
        ease=ease,
        expressiveness=expr,
        directional=direc,
        spatial=spati,
        mean_pair_distance=dbar,
        raw=raw,
        priors=priors,
        adjusted=adjusted,
        transfer=transfer,
        dataset_score=dataset_score,
    )
