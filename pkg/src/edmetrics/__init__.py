"""Diversity-entropy and learnability metrics for embodied datasets."""

from .diversity import (
    EntropyResult,
    diversity_entropy,
    diversity_entropy_knn,
    diversity_entropy_subsampled,
    diversity_entropy_truncated,
    entropy_bounds,
)
from .errors import FeatureFileError, InputError, ManifestError
from .kernel import KernelConfig, gaussian_kernel_matrix, median_bandwidth, pairwise_distances
from .learnability import (
    LearnabilityReport,
    TaskGroup,
    adjusted_learnability,
    expressiveness,
    learnability_report,
    memorization_ease,
    raw_learnability,
    task_priors,
    task_transfer_matrix,
)
from .lowlevel import ImageStats, compute_image_stats, dataset_lowlevel_summary
from .manifest import (
    DatasetManifest,
    EpisodeRecord,
    FeatureMatrix,
    Hyperparams,
    assemble_unified_feature,
    load_dataset,
    load_features,
    load_manifest,
    save_manifest,
    write_features,
)
from .validation import (
    PairedScores,
    SyntheticSpec,
    ClusterSpec,
    correlations,
    directional_suite,
    fixture_check,
    generate_synthetic,
    transfer_ablation,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterSpec",
    "DatasetManifest",
    "EntropyResult",
    "EpisodeRecord",
    "FeatureFileError",
    "FeatureMatrix",
    "Hyperparams",
    "ImageStats",
    "InputError",
    "KernelConfig",
    "LearnabilityReport",
    "ManifestError",
    "PairedScores",
    "SyntheticSpec",
    "TaskGroup",
    "adjusted_learnability",
    "assemble_unified_feature",
    "compute_image_stats",
    "correlations",
    "dataset_lowlevel_summary",
    "directional_suite",
    "diversity_entropy",
    "diversity_entropy_knn",
    "diversity_entropy_subsampled",
    "diversity_entropy_truncated",
    "entropy_bounds",
    "expressiveness",
    "fixture_check",
    "gaussian_kernel_matrix",
    "generate_synthetic",
    "learnability_report",
    "load_dataset",
    "load_features",
    "load_manifest",
    "median_bandwidth",
    "memorization_ease",
    "pairwise_distances",
    "raw_learnability",
    "save_manifest",
    "task_priors",
    "task_transfer_matrix",
    "transfer_ablation",
    "write_features",
]
