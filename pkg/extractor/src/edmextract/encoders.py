"""Frame encoders.

``clip`` (the default) runs a pretrained vision-language image encoder through
the transformers library and needs its weights available locally or a working
model hub connection.  ``patch`` is a dependency-free deterministic fallback:
a fixed random projection of the downsampled image, useful for tests, format
work and pipelines where a pretrained encoder is unavailable.  Encoders are
pluggable by name; alternatives (DINOv2, SigLIP checkpoints) are configuration
values for the clip loader rather than separate code paths.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

CLIP_CHECKPOINT = "openai/clip-vit-base-patch32"


class EncoderError(RuntimeError):
    pass


class PatchProjectionEncoder:
    """Deterministic offline encoder: fixed projection of an 8x8 thumbnail."""

    name = "patch"
    dim = 64

    def __init__(self):
        rng = np.random.default_rng(0x0EDF)
        self._projection = rng.standard_normal((self.dim, 8 * 8 * 3)).astype(np.float32)

    def encode_batch(self, images: list[np.ndarray]) -> np.ndarray:
        out = np.empty((len(images), self.dim), dtype=np.float32)
        for i, img in enumerate(images):
            thumb = Image.fromarray(img).resize((8, 8), Image.BILINEAR)
            raw = np.asarray(thumb, dtype=np.float32).ravel() / 255.0
            vec = self._projection @ raw
            if not np.any(vec):
                vec = np.zeros(self.dim, dtype=np.float32)
                vec[0] = 1.0
            out[i] = vec
        return out


class ClipEncoder:
    """Pretrained CLIP image tower via transformers."""

    name = "clip"

    def __init__(self, checkpoint: str = CLIP_CHECKPOINT, device: str = "cpu"):
        try:
            import torch
            from transformers import CLIPImageProcessor, CLIPVisionModelWithProjection
        except ImportError as exc:
            raise EncoderError(
                f"encoder load failure: transformers/torch unavailable ({exc})"
            ) from exc
        try:
            self._processor = CLIPImageProcessor.from_pretrained(checkpoint)
            self._model = CLIPVisionModelWithProjection.from_pretrained(checkpoint)
        except Exception as exc:  # hub/network/cache failures surface uniformly
            raise EncoderError(f"encoder load failure: {checkpoint}: {exc}") from exc
        self._model.eval().to(device)
        self._torch = torch
        self._device = device
        self.dim = int(self._model.config.projection_dim)

    def encode_batch(self, images: list[np.ndarray]) -> np.ndarray:
        inputs = self._processor(images=list(images), return_tensors="pt")
        with self._torch.no_grad():
            out = self._model(pixel_values=inputs["pixel_values"].to(self._device))
        return out.image_embeds.cpu().numpy().astype(np.float32)


def load_encoder(name: str, device: str = "cpu"):
    if name == "patch":
        return PatchProjectionEncoder()
    if name == "clip":
        return ClipEncoder(device=device)
    if "/" in name:  # any transformers checkpoint with a CLIP-style image tower
        return ClipEncoder(checkpoint=name, device=device)
    raise EncoderError(f"unknown encoder {name!r} (expected 'clip', 'patch' or a checkpoint)")
