"""Low-level visual statistics of dataset frames.

Five per-image measures, all on 8-bit RGB input:

* luminance: mean of the BT.601 grayscale image (0.299 R + 0.587 G + 0.114 B);
* spatial information: population standard deviation of the grayscale image;
* contrast: mean of (max - min) over a fixed 4 x 4 grid of cells, divided by
  max(std, 1);
* colorfulness: the opponent-channel statistic
  sqrt(std_rg^2 + std_yb^2) + 0.3 sqrt(mean_rg^2 + mean_yb^2)
  with rg = R - G and yb = 0.5 (R + G) - B;
* blur: population variance of the summed 3x3 Sobel responses (x + y) over
  interior pixels; lower means blurrier.

Population statistics throughout.  The dataset-level summary samples frames,
computes the five measures per frame, and reports each measure's spread as a
coefficient of variation (population std / (mean + 1e-9)).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputError
from .manifest import DatasetManifest

SPREAD_EPSILON = 1e-9
DEFAULT_SAMPLE_BUDGET = 500

STAT_NAMES = ("luminance", "spatial_information", "contrast", "colorfulness", "blur")

_GRID = 4


@dataclass(frozen=True)
class ImageStats:
    luminance: float
    spatial_information: float
    contrast: float
    colorfulness: float
    blur: float

    def __post_init__(self):
        values = self.as_array()
        if not np.isfinite(values).all() or (values < 0).any():
            raise InputError(f"image statistics must be finite and nonnegative: {self}")
        if self.luminance > 255.0:
            raise InputError(f"luminance {self.luminance} exceeds 255")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.luminance, self.spatial_information, self.contrast,
             self.colorfulness, self.blur]
        )


def _grayscale(img: np.ndarray) -> np.ndarray:
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    return 0.299 * r + 0.587 * g + 0.114 * b


def _grid_contrast(gray: np.ndarray, std: float) -> float:
    h, w = gray.shape
    bh, bw = h // _GRID, w // _GRID
    total = 0.0
    for i in range(_GRID):
        for j in range(_GRID):
            # remainder rows/columns are folded into the last band
            r1 = (i + 1) * bh if i < _GRID - 1 else h
            c1 = (j + 1) * bw if j < _GRID - 1 else w
            cell = gray[i * bh:r1, j * bw:c1]
            total += float(cell.max() - cell.min())
    return total / (_GRID * _GRID * max(std, 1.0))


def _sobel_sum(gray: np.ndarray) -> np.ndarray:
    """Summed 3x3 Sobel x and y responses on interior pixels."""
    tl, tc, tr = gray[:-2, :-2], gray[:-2, 1:-1], gray[:-2, 2:]
    ml, mr = gray[1:-1, :-2], gray[1:-1, 2:]
    bl, bc, br = gray[2:, :-2], gray[2:, 1:-1], gray[2:, 2:]
    gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)
    gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)
    return gx + gy


def compute_image_stats(img: np.ndarray) -> ImageStats:
    """Five low-level statistics of one 8-bit RGB image (H and W >= 4)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"expected an RGB image of shape (H, W, 3), got {img.shape}")
    if img.shape[0] < 4 or img.shape[1] < 4:
        raise InputError(f"image too small: {img.shape[0]}x{img.shape[1]}, need at least 4x4")
    rgb = img.astype(np.float64)
    gray = _grayscale(rgb)
    luminance = float(gray.mean())
    si = float(gray.std())
    contrast = _grid_contrast(gray, si)
    rg = rgb[..., 0] - rgb[..., 1]
    yb = 0.5 * (rgb[..., 0] + rgb[..., 1]) - rgb[..., 2]
    colorfulness = float(
        np.hypot(rg.std(), yb.std()) + 0.3 * np.hypot(rg.mean(), yb.mean())
    )
    blur = float(_sobel_sum(gray).var())
    return ImageStats(
        luminance=luminance,
        spatial_information=si,
        contrast=contrast,
        colorfulness=colorfulness,
        blur=blur,
    )


def load_frame(path: str | Path) -> np.ndarray:
    """Decode an image file to an 8-bit RGB array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise InputError(f"cannot decode image {path}: {exc}") from exc


def dataset_lowlevel_summary(
    manifest: DatasetManifest,
    sample_budget: int = DEFAULT_SAMPLE_BUDGET,
    seed: int = 0,
    root: str | Path | None = None,
) -> np.ndarray:
    """Normalized spread (coefficient of variation) of each statistic.

    Samples up to ``sample_budget`` frames uniformly across all episodes'
    frame references (seeded, without replacement, processed in path order),
    computes the five statistics per frame, and returns, per statistic,
    population std / (mean + 1e-9).  Relative frame paths are resolved
    against ``root`` when given.
    """
    if sample_budget < 2:
        raise InputError(f"sample budget must be >= 2, got {sample_budget}")
    paths: list[Path] = []
    for ep in manifest.episodes:
        if ep.frame_refs:
            paths.extend(Path(p) for p in ep.frame_refs)
    if not paths:
        raise InputError(f"dataset {manifest.name!r} has no frame references")
    if root is not None:
        root = Path(root)
        paths = [p if p.is_absolute() else root / p for p in paths]
    rng = np.random.default_rng(seed)
    if len(paths) > sample_budget:
        chosen = np.sort(rng.choice(len(paths), size=sample_budget, replace=False))
        paths = [paths[i] for i in chosen]
    stats = []
    for p in paths:
        try:
            stats.append(compute_image_stats(load_frame(p)).as_array())
        except InputError:
            continue  # undecodable frames are skipped, not fatal
    if len(stats) < 2:
        raise InputError(
            f"dataset {manifest.name!r}: fewer than 2 decodable frames among the sample"
        )
    values = np.stack(stats)
    return values.std(axis=0) / (values.mean(axis=0) + SPREAD_EPSILON)
