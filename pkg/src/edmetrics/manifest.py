"""Dataset data model and ingestion.

A dataset is described by two files:

* a JSON manifest listing episodes (task label, length in operation steps,
  optional frame paths) plus a reference to the feature file, and
* a binary feature file holding one row per episode (magic ``EDMF``, see
  :func:`load_features` for the exact layout).

Each feature row is the concatenation of the embeddings of three keyframes
of the episode (first, middle, last); :func:`assemble_unified_feature` builds
such a row from per-frame embeddings.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FeatureFileError, InputError, ManifestError

EDMF_MAGIC = b"EDMF"
EDMF_VERSION = 1
FLAG_FRAME_NORMALIZED = 0x1

# magic | version u32 | rows u64 | cols u64 | flags u32, all little-endian
_HEADER = struct.Struct("<4sIQQI")

_ROW_NORM_TOL = 1e-5


@dataclass(frozen=True)
class EpisodeRecord:
    """One episode: a task label, its length in operation steps, optional frames."""

    episode_id: int
    task_id: int
    length: int
    frame_refs: list[str] | None = None

    def validate(self, index: int, task_count: int) -> None:
        if self.length < 1:
            raise ManifestError(f"episode {index}: length must be >= 1, got {self.length}")
        if not 0 <= self.task_id < task_count:
            raise ManifestError(
                f"episode {index}: task_id out of range: {self.task_id} not in [0, {task_count})"
            )
        if self.frame_refs is not None and len(self.frame_refs) != self.length:
            raise ManifestError(
                f"episode {index}: frame_refs has {len(self.frame_refs)} entries, "
                f"expected length {self.length}"
            )


@dataclass(frozen=True)
class DatasetManifest:
    """Dataset metadata; episode order matches feature-file row order."""

    name: str
    episodes: list[EpisodeRecord]
    task_count: int
    feature_file: Path | None = None
    notes: str | None = None

    def __post_init__(self):
        if len(self.episodes) < 1:
            raise ManifestError("manifest must contain at least one episode")
        if self.task_count < 1:
            raise ManifestError(f"task_count must be >= 1, got {self.task_count}")
        for i, ep in enumerate(self.episodes):
            ep.validate(i, self.task_count)

    @property
    def n_episodes(self) -> int:
        return len(self.episodes)

    def task_ids(self) -> np.ndarray:
        """Per-episode task labels in row order."""
        return np.array([ep.task_id for ep in self.episodes], dtype=np.int64)

    def lengths(self) -> np.ndarray:
        """Per-episode lengths in row order."""
        return np.array([ep.length for ep in self.episodes], dtype=np.int64)

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "feature_file": str(self.feature_file) if self.feature_file else "",
            "task_count": self.task_count,
            "episodes": [],
        }
        if self.notes:
            doc["notes"] = self.notes
        for ep in self.episodes:
            rec = {"episode_id": ep.episode_id, "task_id": ep.task_id, "length": ep.length}
            if ep.frame_refs is not None:
                rec["frame_refs"] = list(ep.frame_refs)
            doc["episodes"].append(rec)
        return doc


@dataclass(frozen=True)
class FeatureMatrix:
    """n x D matrix of per-episode features, all entries finite.

    ``row_norm_flag`` asserts that every row has unit Euclidean norm.
    ``frame_normalized`` records the feature-file header flag stating that the
    per-frame embeddings were unit-normalized before concatenation (a full
    3-frame row then has norm sqrt(3), so ``row_norm_flag`` stays False).
    """

    data: np.ndarray
    row_norm_flag: bool = False
    frame_normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise FeatureFileError(f"feature matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise FeatureFileError(f"feature matrix must be at least 1x1, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            r, c = np.argwhere(~np.isfinite(arr))[0]
            raise FeatureFileError(f"non-finite entry at ({r}, {c})")
        if self.row_norm_flag:
            norms = np.linalg.norm(arr.astype(np.float64, copy=False), axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > _ROW_NORM_TOL)
            if bad.size:
                raise FeatureFileError(
                    f"row_norm_flag set but row {bad[0]} has norm {norms[bad[0]]:.8f}"
                )
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Hyperparams:
    """All bandwidths and weights used by the metrics.

    Defaults follow the evaluation setup: diversity bandwidth 0.1, task-internal
    bandwidth 0.001, inter-task bandwidth 0.01, prior scaling 0.02, beta 0.5.
    """

    sigma_global: float = 0.1
    sigma_task: float = 0.001
    sigma_center: float = 0.01
    sigma_model: float = 0.02
    beta: float = 0.5
    kernel_convention: str = "unnormalized"
    epsilon: float = 1e-12

    def __post_init__(self):
        for name in ("sigma_global", "sigma_task", "sigma_center", "sigma_model"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.kernel_convention not in ("unnormalized", "normalized"):
            raise ValueError(f"unknown kernel convention: {self.kernel_convention!r}")
        if not 0.0 < self.epsilon <= 1e-6:
            raise ValueError(f"epsilon must be in (0, 1e-6], got {self.epsilon}")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a JSON dataset manifest.

    A relative ``feature_file`` is resolved against the manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from exc
    try:
        episodes = [
            EpisodeRecord(
                episode_id=int(rec["episode_id"]),
                task_id=int(rec["task_id"]),
                length=int(rec["length"]),
                frame_refs=list(rec["frame_refs"]) if "frame_refs" in rec else None,
            )
            for rec in doc["episodes"]
        ]
        feature_file = doc["feature_file"]
        manifest = DatasetManifest(
            name=str(doc["name"]),
            episodes=episodes,
            task_count=int(doc["task_count"]),
            feature_file=_resolve(path, feature_file) if feature_file else None,
            notes=doc.get("notes"),
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"malformed manifest {path}: missing or bad field {exc}") from exc
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")


def _resolve(manifest_path: Path, feature_file: str) -> Path:
    p = Path(feature_file)
    return p if p.is_absolute() else manifest_path.parent / p


def load_features(path: str | Path, expected_rows: int | None = None) -> FeatureMatrix:
    """Read a binary feature file.

    Layout (little-endian): magic ``EDMF`` | u32 version = 1 | u64 rows |
    u64 cols | u32 flags (bit 0: per-frame embeddings were unit-normalized) |
    rows*cols IEEE-754 binary32 values, row-major.  Values round-trip
    bit-exactly through :func:`write_features`.
    """
    path = Path(path)
    if not path.is_file():
        raise FeatureFileError(f"feature file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, n, d, flags = _HEADER.unpack_from(blob)
    if magic != EDMF_MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}")
    if version != EDMF_VERSION:
        raise FeatureFileError(f"{path}: unsupported format version {version}")
    if n < 1 or d < 1:
        raise FeatureFileError(f"{path}: bad header dimensions n={n}, D={d}")
    payload = blob[_HEADER.size:]
    expected_bytes = n * d * 4
    if len(payload) < expected_bytes:
        raise FeatureFileError(
            f"{path}: truncated payload: {len(payload)} bytes, expected {expected_bytes}"
        )
    if len(payload) > expected_bytes:
        raise FeatureFileError(
            f"{path}: trailing bytes: {len(payload)} bytes, expected {expected_bytes}"
        )
    if expected_rows is not None and n != expected_rows:
        raise FeatureFileError(
            f"{path}: row count mismatch: file has {n} rows, manifest has {expected_rows} episodes"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n, d)
    if not np.isfinite(data).all():
        r, c = np.argwhere(~np.isfinite(data))[0]
        raise FeatureFileError(f"{path}: non-finite entry at ({r}, {c})")
    return FeatureMatrix(
        data=data.copy(),  # decouple from the read-only buffer
        frame_normalized=bool(flags & FLAG_FRAME_NORMALIZED),
    )


def write_features(features: FeatureMatrix | np.ndarray, path: str | Path) -> None:
    """Write a feature matrix in the binary layout read by :func:`load_features`.

    Data is stored as binary32; float64 input is cast (lossy for values that
    are not exactly representable).
    """
    if isinstance(features, FeatureMatrix):
        data, frame_normalized = features.data, features.frame_normalized
    else:
        data, frame_normalized = np.asarray(features), False
    if data.ndim != 2:
        raise FeatureFileError(f"feature matrix must be 2-D, got shape {data.shape}")
    n, d = data.shape
    flags = FLAG_FRAME_NORMALIZED if frame_normalized else 0
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    Path(path).write_bytes(_HEADER.pack(EDMF_MAGIC, EDMF_VERSION, n, d, flags) + payload)


def load_dataset(manifest_path: str | Path) -> tuple[DatasetManifest, FeatureMatrix]:
    """Load a manifest and its feature file, enforcing row-count agreement."""
    manifest = load_manifest(manifest_path)
    if manifest.feature_file is None:
        raise ManifestError(f"manifest {manifest_path} has no feature_file reference")
    features = load_features(manifest.feature_file, expected_rows=manifest.n_episodes)
    return manifest, features


def assemble_unified_feature(frame_embeddings: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate the first, middle and last frame embeddings of an episode.

    The middle index is floor((T-1)/2); episodes with one or two frames reuse
    the available frames, so the output always has three segments (dim 3d).
    """
    if len(frame_embeddings) == 0:
        raise InputError("episode has no frame embeddings")
    frames = [np.asarray(f, dtype=np.float64).ravel() for f in frame_embeddings]
    d = frames[0].shape[0]
    for i, f in enumerate(frames):
        if f.shape[0] != d:
            raise InputError(f"frame {i} has dim {f.shape[0]}, expected {d}")
        if not np.isfinite(f).all():
            raise InputError(f"frame {i} contains non-finite values")
    t = len(frames)
    mid = (t - 1) // 2
    return np.concatenate([frames[0], frames[mid], frames[t - 1]])
