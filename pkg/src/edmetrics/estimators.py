"""Scikit-learn style estimator wrappers around the functional core.

These let the metrics drop into sklearn pipelines and model-selection
utilities: parameters are plain constructor arguments (``get_params`` /
``set_params`` work as usual), ``fit`` validates input with sklearn's
``check_array`` and exposes results as trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .diversity import (
    DEFAULT_EPSILON,
    diversity_entropy,
    diversity_entropy_knn,
    diversity_entropy_subsampled,
    diversity_entropy_truncated,
)
from .errors import InputError
from .kernel import DEFAULT_MEMORY_BUDGET_MB, KernelConfig, median_bandwidth
from .learnability import learnability_report
from .lowlevel import compute_image_stats
from .manifest import DatasetManifest, EpisodeRecord, Hyperparams


class DiversityEntropy(BaseEstimator):
    """Dataset diversity entropy as a fit-style estimator.

    Parameters mirror the functional API: ``bandwidth="median"`` replaces the
    fixed ``sigma`` with the median pairwise distance of the fitted data;
    ``method`` selects the exact estimator or one of the approximations
    (``subsample`` uses ``m``/``repeats``/``seed``, ``truncate`` uses ``tau``,
    ``knn`` uses ``k``).

    Attributes after ``fit``: ``entropy_``, ``bounds_``, ``sigma_``,
    ``result_`` (the full result record), ``n_features_in_``.
    """

    def __init__(
        self,
        sigma: float = 0.1,
        convention: str = "unnormalized",
        bandwidth: str = "fixed",
        method: str = "exact",
        m: int | None = None,
        repeats: int = 8,
        tau: float | None = None,
        k: int | None = None,
        epsilon: float = DEFAULT_EPSILON,
        memory_budget_mb: float = DEFAULT_MEMORY_BUDGET_MB,
        threads: int = 1,
        seed: int = 0,
    ):
        self.sigma = sigma
        self.convention = convention
        self.bandwidth = bandwidth
        self.method = method
        self.m = m
        self.repeats = repeats
        self.tau = tau
        self.k = k
        self.epsilon = epsilon
        self.memory_budget_mb = memory_budget_mb
        self.threads = threads
        self.seed = seed

    def fit(self, X, y=None):
        X = check_array(X, dtype=[np.float64, np.float32])
        if self.bandwidth == "median":
            sigma = median_bandwidth(X)
        elif self.bandwidth == "fixed":
            sigma = self.sigma
        else:
            raise InputError(f"bandwidth must be 'fixed' or 'median', got {self.bandwidth!r}")
        cfg = KernelConfig(sigma=sigma, convention=self.convention)
        kwargs = dict(memory_budget_mb=self.memory_budget_mb, threads=self.threads)
        if self.method == "exact":
            result = diversity_entropy(X, cfg, self.epsilon, **kwargs)
        elif self.method == "subsample":
            m = self.m if self.m is not None else X.shape[0]
            result = diversity_entropy_subsampled(
                X, cfg, m=m, repeats=self.repeats, seed=self.seed, epsilon=self.epsilon,
                **kwargs,
            )
        elif self.method == "truncate":
            if self.tau is None:
                raise InputError("method='truncate' requires tau")
            result = diversity_entropy_truncated(X, cfg, tau=self.tau, epsilon=self.epsilon,
                                                 **kwargs)
        elif self.method == "knn":
            if self.k is None:
                raise InputError("method='knn' requires k")
            result = diversity_entropy_knn(X, cfg, k=self.k, epsilon=self.epsilon, **kwargs)
        else:
            raise InputError(f"unknown method {self.method!r}")
        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.entropy_ = result.value
        self.bounds_ = result.bounds
        self.sigma_ = sigma
        return self

    def score(self, X, y=None) -> float:
        """Entropy of X under this estimator's parameters."""
        return type(self)(**self.get_params()).fit(X).entropy_


class LearnabilityScorer(BaseEstimator):
    """Task-learnability scoring as a fit-style estimator.

    ``fit(X, y)`` groups rows by the task labels in ``y`` (arbitrary labels
    are re-encoded to contiguous ids, kept in ``classes_``); ``lengths`` gives
    per-sample episode lengths (default 1).

    Attributes after ``fit``: ``report_`` (per-task factors and transfer
    matrix), ``dataset_score_``, ``classes_``, ``n_features_in_``.
    """

    def __init__(
        self,
        beta: float = 0.5,
        sigma_task: float = 0.001,
        sigma_center: float = 0.01,
        sigma_model: float = 0.02,
        variance_floor: float = 1e-18,
    ):
        self.beta = beta
        self.sigma_task = sigma_task
        self.sigma_center = sigma_center
        self.sigma_model = sigma_model
        self.variance_floor = variance_floor

    def fit(self, X, y, lengths=None):
        X = check_array(X, dtype=[np.float64, np.float32])
        y = column_or_1d(y)
        if y.shape[0] != X.shape[0]:
            raise InputError(f"y has {y.shape[0]} labels for {X.shape[0]} rows")
        classes, task_ids = np.unique(y, return_inverse=True)
        if lengths is None:
            lengths = np.ones(X.shape[0], dtype=np.int64)
        else:
            lengths = np.asarray(lengths, dtype=np.int64)
            if lengths.shape != (X.shape[0],):
                raise InputError("lengths must have one entry per row")
        episodes = [
            EpisodeRecord(episode_id=i, task_id=int(task_ids[i]), length=int(lengths[i]))
            for i in range(X.shape[0])
        ]
        manifest = DatasetManifest(name="in-memory", episodes=episodes,
                                   task_count=len(classes))
        hp = Hyperparams(
            sigma_task=self.sigma_task,
            sigma_center=self.sigma_center,
            sigma_model=self.sigma_model,
            beta=self.beta,
        )
        self.report_ = learnability_report(manifest, X, hp,
                                           variance_floor=self.variance_floor)
        self.dataset_score_ = self.report_.dataset_score
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        return self

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "dataset_score_")
        return self.dataset_score_


class ImageStatsTransformer(BaseEstimator, TransformerMixin):
    """Map a sequence of RGB images to their five low-level statistics.

    ``transform`` returns an (n, 5) array with columns luminance, spatial
    information, contrast, colorfulness, blur.
    """

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        return np.stack([compute_image_stats(img).as_array() for img in X])
