"""Writers for the dataset interchange formats.

The feature file layout (shared with the metrics toolkit, all little-endian):
magic ``EDMF`` | u32 version = 1 | u64 rows | u64 cols | u32 flags (bit 0:
per-frame embeddings were unit-normalized) | rows*cols binary32, row-major.
The manifest is a JSON document with name, feature_file, task_count and an
episode list.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

EDMF_MAGIC = b"EDMF"
EDMF_VERSION = 1
FLAG_FRAME_NORMALIZED = 0x1

HEADER = struct.Struct("<4sIQQI")


def write_feature_file(path: str | Path, rows: np.ndarray, frame_normalized: bool) -> None:
    """Write features atomically (temp file + rename)."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    n, d = rows.shape
    flags = FLAG_FRAME_NORMALIZED if frame_normalized else 0
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(HEADER.pack(EDMF_MAGIC, EDMF_VERSION, n, d, flags) + rows.tobytes())
    os.replace(tmp, path)


def write_manifest(
    path: str | Path,
    name: str,
    feature_file: str,
    episodes: list[dict],
    task_count: int,
) -> None:
    doc = {
        "name": name,
        "feature_file": feature_file,
        "task_count": task_count,
        "episodes": episodes,
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2) + "\n")
    os.replace(tmp, path)


def read_header(path: str | Path) -> tuple[bytes, int, int, int, int, bytes]:
    """(magic, version, rows, cols, flags, payload) of a feature file."""
    blob = Path(path).read_bytes()
    if len(blob) < HEADER.size:
        raise ValueError(f"{path}: file shorter than the header")
    magic, version, n, d, flags = HEADER.unpack_from(blob)
    return magic, version, n, d, flags, blob[HEADER.size:]
