"""Dual encoders that map images and prompts into one embedding space.

Two families are registered:

  toy:<dim>          deterministic offline encoder for tests and demos.
                     Color-word anchors are shared between the image and
                     text sides, so color-dominant toy datasets zero-shot
                     correctly without any downloaded weights.
  hf-clip:<model-id> a pretrained CLIP checkpoint through transformers
                     (requires torch + transformers and local or
                     downloadable weights).
"""

from __future__ import annotations

import zlib

import numpy as np
from PIL import Image

_COLOR_PROTOTYPES = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "cyan": (0.0, 1.0, 1.0),
    "magenta": (1.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "black": (0.0, 0.0, 0.0),
}
_TOY_GRID = 8
_TOY_COLOR_BANDWIDTH = 0.35
_TOY_TEXTURE_GAIN = 0.05


def _normalize(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ValueError("cannot normalize a zero embedding")
    return rows / norms


class ToyDualEncoder:
    """Rule-based stand-in for a vision-language encoder.

    Images are summarized by their mean color (softly matched against a
    fixed color codebook) plus a faint projection of the downsampled
    pixels; prompts are matched against the same codebook by word. Both
    sides share the seeded anchor directions, which is what makes
    zero-shot work on color-dominant data.
    """

    def __init__(self, dim: int = 16, seed: int = 9) -> None:
        if dim < len(_COLOR_PROTOTYPES):
            raise ValueError(f"toy encoder needs dim >= {len(_COLOR_PROTOTYPES)}")
        self.dim = dim
        rng = np.random.default_rng(seed)
        gauss = rng.standard_normal((dim, len(_COLOR_PROTOTYPES)))
        self._anchors = np.linalg.qr(gauss)[0].T
        self._protos = np.array(list(_COLOR_PROTOTYPES.values()))
        self._words = list(_COLOR_PROTOTYPES)
        self._texture_proj = rng.standard_normal((_TOY_GRID * _TOY_GRID * 3, dim))

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        rows = np.empty((len(images), self.dim))
        for i, image in enumerate(images):
            small = np.asarray(
                image.convert("RGB").resize((_TOY_GRID, _TOY_GRID)), dtype=np.float64
            ) / 255.0
            mean_rgb = small.reshape(-1, 3).mean(axis=0)
            dist = np.linalg.norm(self._protos - mean_rgb[None, :], axis=1)
            weights = np.exp(-((dist / _TOY_COLOR_BANDWIDTH) ** 2))
            weights /= weights.sum()
            texture = (small.ravel() - 0.5) @ self._texture_proj
            rows[i] = weights @ self._anchors + _TOY_TEXTURE_GAIN * texture
        return _normalize(rows)

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        rows = np.empty((len(prompts), self.dim))
        for i, prompt in enumerate(prompts):
            words = prompt.lower().replace(",", " ").split()
            hits = [self._words.index(w) for w in words if w in _COLOR_PROTOTYPES]
            if hits:
                rows[i] = self._anchors[hits].mean(axis=0)
            else:
                fallback = np.random.default_rng(zlib.crc32(prompt.encode("utf-8")))
                rows[i] = fallback.standard_normal(self.dim)
        return _normalize(rows)


class HFClipEncoder:
    """Pretrained CLIP checkpoint through the transformers library."""

    def __init__(self, model_id: str, device: str = "cpu", batch_size: int = 32) -> None:
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "the hf-clip encoder needs the [clip] extra (torch + transformers)"
            ) from exc
        self._torch = torch
        self.batch_size = batch_size
        self.device = device
        self.model = CLIPModel.from_pretrained(model_id).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self.dim = self.model.config.projection_dim

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        chunks = []
        with self._torch.no_grad():
            for start in range(0, len(images), self.batch_size):
                batch = [img.convert("RGB") for img in images[start : start + self.batch_size]]
                inputs = self.processor(images=batch, return_tensors="pt").to(self.device)
                features = self.model.get_image_features(**inputs)
                chunks.append(features.cpu().numpy().astype(np.float64))
        return _normalize(np.concatenate(chunks, axis=0))

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        with self._torch.no_grad():
            inputs = self.processor(
                text=prompts, return_tensors="pt", padding=True, truncation=True
            ).to(self.device)
            features = self.model.get_text_features(**inputs)
        return _normalize(features.cpu().numpy().astype(np.float64))


def get_encoder(model_id: str, device: str = "cpu", batch_size: int = 32):
    """Resolve a model identifier to an encoder instance."""
    if model_id.startswith("toy"):
        _, _, dim = model_id.partition(":")
        return ToyDualEncoder(dim=int(dim) if dim else 16)
    if model_id.startswith("hf-clip:"):
        return HFClipEncoder(model_id.split(":", 1)[1], device=device, batch_size=batch_size)
    raise ValueError(
        f"unknown model identifier {model_id!r}; expected toy[:dim] or hf-clip:<id>"
    )
