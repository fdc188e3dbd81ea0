"""Turn per-episode frame directories into the dataset interchange files.

The frames root holds one directory per episode, frames in lexicographic step
order.  Every frame is encoded, per-frame embeddings are unit-normalized (by
default), and each episode becomes one feature row: the concatenation of the
first, middle (floor((T-1)/2)) and last frame embeddings, so the row width is
three times the encoder dimension.  Episode directories named like
``t3_reach_cup`` carry their task label in the prefix; otherwise every episode
gets task 0.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import EncoderError, load_encoder
from .format import (
    EDMF_MAGIC,
    EDMF_VERSION,
    FLAG_FRAME_NORMALIZED,
    read_header,
    write_feature_file,
    write_manifest,
)

SEGMENT_NORM_TOL = 1e-3

_TASK_PREFIX = re.compile(r"^t(\d+)[_-]")

FRAME_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


@dataclass(frozen=True)
class ExtractorConfig:
    encoder_name: str = "clip"
    batch_size: int = 32
    normalize: bool = True
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ExtractionSummary:
    episodes: int
    frames: int
    encoder: str
    dim: int
    manifest_path: Path
    feature_path: Path


def _load_frame(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise EncoderError(f"unreadable frame {path}: {exc}") from exc


def _episode_dirs(frames_root: Path) -> list[Path]:
    dirs = sorted(p for p in frames_root.iterdir() if p.is_dir())
    if not dirs:
        raise EncoderError(f"no episode directories under {frames_root}")
    return dirs


def _frame_paths(episode_dir: Path) -> list[Path]:
    frames = sorted(
        p for p in episode_dir.iterdir()
        if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES
    )
    if not frames:
        raise EncoderError(f"empty episode directory {episode_dir}")
    return frames


def _task_id(episode_dir: Path) -> int:
    m = _TASK_PREFIX.match(episode_dir.name)
    return int(m.group(1)) if m else 0


def extract_dataset(
    frames_root: str | Path,
    out_manifest: str | Path,
    out_features: str | Path,
    cfg: ExtractorConfig | None = None,
) -> ExtractionSummary:
    """Encode all episodes and write the manifest + feature file pair."""
    cfg = cfg or ExtractorConfig()
    frames_root = Path(frames_root)
    if not frames_root.is_dir():
        raise EncoderError(f"frames root {frames_root} is not a directory")
    encoder = load_encoder(cfg.encoder_name, device=cfg.device)
    episodes = _episode_dirs(frames_root)
    out_manifest, out_features = Path(out_manifest), Path(out_features)
    anchor = out_manifest.parent  # frame_refs resolve against the manifest's directory

    keyframes: list[Path] = []
    records = []
    total_frames = 0
    for idx, episode_dir in enumerate(episodes):
        paths = _frame_paths(episode_dir)
        t = len(paths)
        keyframes += [paths[0], paths[(t - 1) // 2], paths[t - 1]]
        total_frames += t
        records.append({
            "episode_id": idx,
            "task_id": _task_id(episode_dir),
            "length": t,
            "frame_refs": [os.path.relpath(p, anchor) for p in paths],
        })
    task_count = max(r["task_id"] for r in records) + 1

    chunks = []
    for start in range(0, len(keyframes), cfg.batch_size):
        batch = [_load_frame(p) for p in keyframes[start:start + cfg.batch_size]]
        chunks.append(encoder.encode_batch(batch))
    emb = np.vstack(chunks).astype(np.float32)
    if cfg.normalize:
        emb = emb / np.maximum(np.linalg.norm(emb, axis=1, keepdims=True), 1e-30)
    rows = emb.reshape(len(episodes), 3 * encoder.dim)

    write_feature_file(out_features, rows, frame_normalized=cfg.normalize)
    write_manifest(
        out_manifest,
        name=frames_root.name,
        feature_file=out_features.name if out_features.parent == out_manifest.parent
        else str(out_features),
        episodes=records,
        task_count=task_count,
    )
    return ExtractionSummary(
        episodes=len(episodes),
        frames=total_frames,
        encoder=encoder.name,
        dim=encoder.dim,
        manifest_path=out_manifest,
        feature_path=out_features,
    )


@dataclass(frozen=True)
class SelfcheckResult:
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def selfcheck(feature_path: str | Path) -> SelfcheckResult:
    """Verify a feature file: header, payload size, finiteness, segment norms.

    Segment norms are only checked when the header says the per-frame
    embeddings were normalized (flag bit 0); each of the three row segments
    must then have unit norm within 1e-3.
    """
    failures = []
    try:
        magic, version, n, d, flags, payload = read_header(feature_path)
    except (OSError, ValueError) as exc:
        return SelfcheckResult(failures=[f"header: {exc}"])
    if magic != EDMF_MAGIC:
        failures.append(f"magic: got {magic!r}")
    if version != EDMF_VERSION:
        failures.append(f"version: got {version}")
    if failures:
        return SelfcheckResult(failures=failures)
    expected = n * d * 4
    if len(payload) != expected:
        failures.append(f"payload length: {len(payload)} bytes, expected {expected}")
        return SelfcheckResult(failures=failures)
    data = np.frombuffer(payload, dtype="<f4").reshape(n, d)
    if not np.isfinite(data).all():
        r, c = np.argwhere(~np.isfinite(data))[0]
        failures.append(f"finite: non-finite entry at ({r}, {c})")
    if flags & FLAG_FRAME_NORMALIZED and not failures:
        if d % 3 != 0:
            failures.append(f"segment norm: width {d} is not divisible by 3")
        else:
            segments = data.reshape(n, 3, d // 3).astype(np.float64)
            norms = np.linalg.norm(segments, axis=2)
            bad = np.argwhere(np.abs(norms - 1.0) > SEGMENT_NORM_TOL)
            if bad.size:
                r, s = bad[0]
                failures.append(
                    f"segment norm: row {r} segment {s} has norm {norms[r, s]:.6f}"
                )
    return SelfcheckResult(failures=failures)
