"""Shared test utilities: on-disk dataset construction."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from edmetrics.manifest import write_features


def make_dataset(
    tmp_path: Path,
    X: np.ndarray,
    task_ids,
    lengths=None,
    name: str = "testset",
    frame_refs: dict[int, list[str]] | None = None,
) -> Path:
    """Write a manifest + feature file pair and return the manifest path."""
    X = np.asarray(X)
    n = X.shape[0]
    task_ids = list(task_ids)
    lengths = list(lengths) if lengths is not None else [1] * n
    episodes = []
    for i in range(n):
        rec = {"episode_id": i, "task_id": int(task_ids[i]), "length": int(lengths[i])}
        if frame_refs and i in frame_refs:
            rec["frame_refs"] = frame_refs[i]
        episodes.append(rec)
    feature_path = tmp_path / f"{name}.edmf"
    write_features(X, feature_path)
    manifest = {
        "name": name,
        "feature_file": feature_path.name,
        "task_count": int(max(task_ids)) + 1,
        "episodes": episodes,
    }
    manifest_path = tmp_path / f"{name}.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path
