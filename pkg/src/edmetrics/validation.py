"""Validation harness: correlation metrics, the bundled score fixture,
synthetic dataset generation, and directional-behavior scenarios.

The bundled fixture (``data/libero_scores.csv``) holds measured task-level
success-rate gains (``gt``) and the scores this library's method predicted for
them (``pred``) across five simulation suites; :func:`fixture_check` recomputes
the rank/linear correlations per suite and compares them against the frozen
reference values.  Kendall's coefficient uses the tie-corrected tau-b variant,
which is what reproduces the reference numbers (the ground-truth columns
contain ties).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import stats

from .diversity import diversity_entropy
from .errors import InputError
from .kernel import KernelConfig
from .learnability import (
    expressiveness,
    group_tasks,
    memorization_ease,
    task_priors,
    task_transfer_matrix,
)
from .manifest import DatasetManifest, EpisodeRecord, FeatureMatrix, Hyperparams

FIXTURE_RESOURCE = "libero_scores.csv"

# Frozen reference correlations (srcc, krcc, plcc) for the bundled fixture.
REFERENCE_CORRELATIONS: dict[str, tuple[float, float, float]] = {
    "goal": (0.6159, 0.4319, 0.7479),
    "object": (0.3303, 0.2300, 0.1975),
    "spatial": (0.2553, 0.2247, 0.3678),
    "ten": (0.6848, 0.4667, 0.6743),
    "goal+10": (0.7622, 0.5990, 0.7955),
    "all": (0.7974, 0.6033, 0.7966),
}

# fixture tags pooled into each reference row
_GROUPS: dict[str, tuple[str, ...]] = {
    "goal": ("goal",),
    "object": ("object",),
    "spatial": ("spatial",),
    "ten": ("ten",),
    "goal+10": ("goal10_part1", "goal10_part2"),
    "all": ("goal", "object", "spatial", "ten", "goal10_part1", "goal10_part2"),
}


@dataclass(frozen=True)
class PairedScores:
    predicted: np.ndarray
    ground_truth: np.ndarray
    labels: list[str] | None = None

    def __post_init__(self):
        pred = np.asarray(self.predicted, dtype=np.float64)
        gt = np.asarray(self.ground_truth, dtype=np.float64)
        if pred.shape != gt.shape or pred.ndim != 1:
            raise InputError(
                f"score lists must be 1-D and equal length, got {pred.shape} vs {gt.shape}"
            )
        if pred.shape[0] < 2:
            raise InputError("need at least 2 score pairs")
        if not (np.isfinite(pred).all() and np.isfinite(gt).all()):
            raise InputError("scores must be finite")
        if self.labels is not None and len(self.labels) != pred.shape[0]:
            raise InputError("labels length mismatch")
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "ground_truth", gt)


def correlations(scores: PairedScores, kendall_variant: str = "b") -> tuple[float, float, float]:
    """(SRCC, KRCC, PLCC) between predicted and ground-truth scores.

    SRCC is the Pearson correlation of average ranks (ties share the mean
    rank), KRCC is Kendall's tau (tie-corrected tau-b by default) and PLCC the
    plain Pearson correlation.
    """
    pred, gt = scores.predicted, scores.ground_truth
    if np.all(pred == pred[0]) or np.all(gt == gt[0]):
        raise InputError("correlations are undefined for a constant score list")
    srcc = float(stats.spearmanr(pred, gt).statistic)
    krcc = float(stats.kendalltau(pred, gt, variant=kendall_variant).statistic)
    plcc = float(stats.pearsonr(pred, gt).statistic)
    return srcc, krcc, plcc


def load_fixture() -> list[tuple[str, float, float]]:
    """Rows (dataset_tag, gt, pred) of the bundled score fixture."""
    ref = resources.files("edmetrics").joinpath("data").joinpath(FIXTURE_RESOURCE)
    try:
        text = ref.read_text()
    except (FileNotFoundError, OSError) as exc:
        raise InputError(f"bundled fixture {FIXTURE_RESOURCE} is missing") from exc
    rows = []
    try:
        for rec in csv.DictReader(text.splitlines()):
            rows.append((rec["dataset_tag"], float(rec["gt"]), float(rec["pred"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bundled fixture {FIXTURE_RESOURCE} is corrupt: {exc}") from exc
    if not rows:
        raise InputError(f"bundled fixture {FIXTURE_RESOURCE} is empty")
    return rows


@dataclass(frozen=True)
class FixtureCell:
    group: str
    metric: str
    computed: float
    expected: float
    deviation: float
    passed: bool


@dataclass(frozen=True)
class FixtureReport:
    tolerance: float
    kendall_variant: str
    cells: list[FixtureCell]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)


def fixture_check(tolerance: float = 0.01, kendall_variant: str = "b") -> FixtureReport:
    """Recompute the fixture correlations per suite and compare to the references."""
    rows = load_fixture()
    cells = []
    for group, tags in _GROUPS.items():
        sel = [(gt, pred) for tag, gt, pred in rows if tag in tags]
        scores = PairedScores(
            predicted=np.array([p for _, p in sel]),
            ground_truth=np.array([g for g, _ in sel]),
        )
        computed = correlations(scores, kendall_variant=kendall_variant)
        for metric, comp, exp in zip(("srcc", "krcc", "plcc"), computed,
                                     REFERENCE_CORRELATIONS[group]):
            dev = abs(comp - exp)
            cells.append(
                FixtureCell(
                    group=group, metric=metric, computed=comp, expected=exp,
                    deviation=dev, passed=bool(dev <= tolerance),
                )
            )
    return FixtureReport(tolerance=tolerance, kendall_variant=kendall_variant, cells=cells)


@dataclass(frozen=True)
class ClusterSpec:
    """One isotropic Gaussian cluster; ``spread`` may be a per-axis vector."""

    center: np.ndarray
    spread: float | np.ndarray
    count: int
    task_id: int
    mean_length: float = 1.0

    def __post_init__(self):
        if self.count < 1:
            raise InputError(f"cluster count must be >= 1, got {self.count}")
        if np.any(np.asarray(self.spread) < 0):
            raise InputError("cluster spread must be >= 0")


@dataclass(frozen=True)
class SyntheticSpec:
    clusters: list[ClusterSpec]
    seed: int = 0
    name: str = "synthetic"


def generate_synthetic(spec: SyntheticSpec) -> tuple[FeatureMatrix, DatasetManifest]:
    """Draw Gaussian clusters and a matching manifest, deterministic per seed.

    Rows follow cluster order; episode lengths are the cluster's mean length
    rounded to an integer (at least 1).
    """
    if not spec.clusters:
        raise InputError("synthetic spec needs at least one cluster")
    rng = np.random.default_rng(spec.seed)
    blocks = []
    episodes = []
    episode_id = 0
    for c in spec.clusters:
        center = np.asarray(c.center, dtype=np.float64)
        rows = center + np.asarray(c.spread) * rng.standard_normal((c.count, center.shape[0]))
        blocks.append(rows)
        length = max(1, round(c.mean_length))
        for _ in range(c.count):
            episodes.append(EpisodeRecord(episode_id=episode_id, task_id=c.task_id,
                                          length=length))
            episode_id += 1
    task_count = max(c.task_id for c in spec.clusters) + 1
    manifest = DatasetManifest(name=spec.name, episodes=episodes, task_count=task_count)
    return FeatureMatrix(data=np.vstack(blocks)), manifest


@dataclass(frozen=True)
class ScenarioResult:
    """Outcome of one directional scenario: strict sign checks plus notes."""

    name: str
    deltas: dict[str, float]
    checks: dict[str, bool]
    observed: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass(frozen=True)
class DirectionalResult:
    scenarios: list[ScenarioResult]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.scenarios)


# Bandwidths matched to the compact synthetic geometry below.  The tabulated
# directional behaviors are qualitative in the bandwidths, but asserting STRICT
# float64 signs needs kernel scales the geometry can actually move: the
# inter-task kernel (sigma 0.01) caps center distances near 0.38 before it
# underflows, which in turn needs a diversity bandwidth of about 0.02 so that
# clusters stay sparse relative to it.
DIRECTIONAL_HYPERPARAMS = Hyperparams(sigma_global=0.02)


def default_directional_spec(seed: int = 0, dim: int = 6) -> SyntheticSpec:
    """Five-task layout tuned so every directional scenario has a strict sign.

    Task 0 (the probed task) sits at the origin and is anisotropic: a dominant
    first axis plus faint spread elsewhere, which makes both the "far sample"
    (fills a weak direction) and the "duplicate sample" (sharpens the dominant
    direction) effects visible in the covariance spectrum.  Task 0 also carries
    one fixed outlier pinned to the rim of task 4, a tight bystander cluster on
    the same dominant axis: the outlier skews task 0's spectrum when duplicated
    yet sits in a dense region, so its duplicate lowers the dataset entropy.
    The peer task spans the second axis and tasks 2 and 3 sit on the negative
    side of further axes, so moving the peer away from task 0 also moves it
    away from everyone else.  The last axis stays free for far placements.
    """
    if dim < 6:
        raise InputError(f"directional layout needs dim >= 6, got {dim}")
    outlier = np.zeros(dim)
    outlier[0] = 0.05
    main_spread = np.full(dim, 0.002)
    main_spread[0] = 0.015
    clusters = [
        ClusterSpec(center=np.zeros(dim), spread=main_spread, count=5,
                    task_id=0, mean_length=10),
        ClusterSpec(center=outlier, spread=0.0, count=1, task_id=0, mean_length=10),
    ]
    for t in range(1, 5):
        center = np.zeros(dim)
        if t == 1:
            center[1] = 0.1
        elif t in (2, 3):
            center[t] = -0.1
        else:
            center[0] = 0.055
        spread = 0.004 if t == 4 else 0.01
        clusters.append(ClusterSpec(center=center, spread=spread, count=6,
                                    task_id=t, mean_length=10))
    return SyntheticSpec(clusters=clusters, seed=seed, name=f"directional-{seed}")


def _factors(manifest: DatasetManifest, X: np.ndarray, hp: Hyperparams):
    """Per-task E/R, priors and transfer needed by the directional scenarios."""
    groups = group_tasks(manifest, X)
    ease = [memorization_ease(X[g.row_indices], g.mean_length, hp.sigma_task) for g in groups]
    expr = [expressiveness(X[g.row_indices], hp.sigma_task)[0] for g in groups]
    counts = np.array([g.row_indices.size for g in groups])
    priors = task_priors(counts, hp.sigma_model)
    transfer = task_transfer_matrix(np.stack([g.centroid for g in groups]), hp.sigma_center)
    return np.array(ease), np.array(expr), priors, transfer


def _append(manifest: DatasetManifest, X: np.ndarray, row: np.ndarray, task_id: int,
            length: int) -> tuple[DatasetManifest, np.ndarray]:
    episodes = list(manifest.episodes) + [
        EpisodeRecord(episode_id=manifest.n_episodes, task_id=task_id, length=length)
    ]
    grown = DatasetManifest(name=manifest.name, episodes=episodes,
                            task_count=manifest.task_count)
    return grown, np.vstack([X, row[None, :]])


def directional_suite(base_spec: SyntheticSpec, hp: Hyperparams | None = None) -> DirectionalResult:
    """Run the five sample-change scenarios and check the expected strict signs.

    Scenarios, with the asserted directions (probed task t = 0, peer task
    s = 1): adding a sample to another task (entropy up, prior of t down, ease
    and expressiveness of t untouched); adding a far sample to t (entropy,
    prior, expressiveness up, ease down); duplicating a sample of t (entropy
    and expressiveness down, prior and ease up); moving s toward t (entropy
    down, transfer up); moving s away (entropy up, transfer down).  Effects the
    analysis marks as direction-free (e.g. transfer shifts when a task's
    centroid moves) are reported in ``observed`` but never asserted.
    """
    hp = hp or DIRECTIONAL_HYPERPARAMS
    X_fm, manifest = generate_synthetic(base_spec)
    X = X_fm.data
    task_ids = manifest.task_ids()
    if manifest.task_count < 2:
        raise InputError("directional suite needs at least 2 tasks")
    cfg = KernelConfig(sigma=hp.sigma_global, convention=hp.kernel_convention)
    t, s = 0, 1
    rows_t = np.flatnonzero(task_ids == t)
    rows_s = np.flatnonzero(task_ids == s)
    base_h = diversity_entropy(X, cfg, hp.epsilon).value
    base_e, base_r, base_pi, base_tr = _factors(manifest, X, hp)
    mean_len_t = int(manifest.lengths()[rows_t].mean())
    scenarios = []

    def run(name, manifest2, X2, expect):
        h = diversity_entropy(X2, cfg, hp.epsilon).value
        ease, expr, priors, transfer = _factors(manifest2, X2, hp)
        deltas = {
            "diversity_entropy": float(h - base_h),
            "prior_t": float(priors[t] - base_pi[t]),
            "expressiveness_t": float(expr[t] - base_r[t]),
            "ease_t": float(ease[t] - base_e[t]),
            "transfer_st": float(transfer[s, t] - base_tr[s, t]),
        }
        checks = {}
        for key, sign in expect.items():
            if sign == "+":
                checks[key] = bool(deltas[key] > 0.0)
            elif sign == "-":
                checks[key] = bool(deltas[key] < 0.0)
            else:
                checks[key] = bool(deltas[key] == 0.0)
        observed = {k: v for k, v in deltas.items() if k not in expect}
        scenarios.append(ScenarioResult(name=name, deltas=deltas, checks=checks,
                                        observed=observed))

    # far placements go along the last axis, unused by the cluster centers
    away = np.zeros(X.shape[1])
    away[-1] = 3.0 * hp.sigma_global

    centroid_t = X[rows_t].mean(axis=0)
    centroid_s = X[rows_s].mean(axis=0)

    m2, x2 = _append(manifest, X, centroid_s + away, s, mean_len_t)
    run("add_cross_task_sample", m2, x2,
        {"diversity_entropy": "+", "prior_t": "-", "ease_t": "0", "expressiveness_t": "0"})

    # the same offset applied to the probed task grows a faint covariance axis
    m2, x2 = _append(manifest, X, centroid_t + away, t, mean_len_t)
    run("add_far_sample", m2, x2,
        {"diversity_entropy": "+", "prior_t": "+", "expressiveness_t": "+", "ease_t": "-"})

    # duplicate the probed task's extreme row along its dominant axis (the
    # dense side, where the layout's bystander cluster sits)
    dominant = rows_t[np.argmax(X[rows_t, 0])]
    m2, x2 = _append(manifest, X, X[dominant], t, mean_len_t)
    run("add_duplicate_sample", m2, x2,
        {"diversity_entropy": "-", "prior_t": "+", "expressiveness_t": "-", "ease_t": "+"})

    def moved(factor):
        shift = (centroid_t - centroid_s) * factor
        X2 = X.copy()
        X2[rows_s] += shift
        return X2

    run("tasks_move_closer", manifest, moved(0.5),
        {"diversity_entropy": "-", "transfer_st": "+"})
    run("tasks_move_apart", manifest, moved(-1.0),
        {"diversity_entropy": "+", "transfer_st": "-"})
    return DirectionalResult(scenarios=scenarios)


def transfer_ablation(
    manifest: DatasetManifest,
    X: FeatureMatrix | np.ndarray,
    hp: Hyperparams | None = None,
    ground_truth: np.ndarray | None = None,
) -> dict:
    """Run the raw and transfer-adjusted scoring paths side by side.

    The raw path skips the inter-task transfer mix (score pi_t * L_t per task);
    the adjusted path is the full pipeline.  When per-task ground-truth scores
    are provided, correlations for both paths are included.
    """
    from .learnability import learnability_report

    hp = hp or Hyperparams()
    report = learnability_report(manifest, X, hp)
    raw_scores = report.priors * report.raw
    out = {
        "raw": {"per_task": raw_scores, "dataset_score": float(np.mean(raw_scores))},
        "adjusted": {"per_task": report.adjusted, "dataset_score": report.dataset_score},
        "report": report,
    }
    if ground_truth is not None:
        gt = np.asarray(ground_truth, dtype=np.float64)
        out["raw"]["correlations"] = correlations(PairedScores(raw_scores, gt))
        out["adjusted"]["correlations"] = correlations(PairedScores(report.adjusted, gt))
    return out
