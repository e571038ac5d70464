"""Augmentation by sampling inside each image's latent box.

Samples are coordinate-wise uniform between the box corners, then
renormalized onto the unit sphere (toggleable for ablations). Each image
draws from its own sub-seed (seed XOR image index), so per-image work
can be parallelized or reordered without changing the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxnet import BoxNetModel, LatentBox, image_boxes
from .errors import NumericError, ValidationError
from .store import EmbeddingSet

_ZERO_NORM_EPS = 1e-12


@dataclass
class AugmentationConfig:
    """How many samples to draw per image and how."""

    samples_per_image: int = 5
    seed: int = 0
    renormalize_samples: bool = True

    def validate(self) -> None:
        if self.samples_per_image < 0:
            raise ValidationError("samples_per_image must be non-negative")


def _sample_rows(
    lower: np.ndarray, upper: np.ndarray, k: int, seed: int, renormalize: bool
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    width = upper - lower
    u = rng.random((k, lower.shape[0]))
    points = lower + u * width
    # guard float round-off so the pre-normalization point is always in the box
    np.clip(points, lower, upper, out=points)
    if not renormalize:
        return points
    norms = np.linalg.norm(points, axis=1)
    flat = np.flatnonzero(norms < _ZERO_NORM_EPS)
    for i in flat:
        retry = lower + rng.random(lower.shape[0]) * width
        np.clip(retry, lower, upper, out=retry)
        norm = np.linalg.norm(retry)
        if norm < _ZERO_NORM_EPS:
            raise NumericError(
                f"sample {i} degenerated to the zero vector twice; box spans the origin"
            )
        points[i] = retry
        norms[i] = norm
    return points / norms[:, None]


def sample_from_box(
    box: LatentBox, k: int, seed: int, renormalize: bool = True
) -> np.ndarray:
    """Draw k points uniformly inside the box (unit-norm rows by default)."""
    if k < 0:
        raise ValidationError("k must be non-negative")
    if k == 0:
        return np.zeros((0, box.lower.shape[0]))
    return _sample_rows(box.lower, box.upper, k, seed, renormalize)


def augment_dataset(
    train: EmbeddingSet, model: BoxNetModel, config: AugmentationConfig
) -> EmbeddingSet:
    """Original rows followed by k box samples per image, labels inherited.

    Output order is all originals first, then the augmentations grouped
    by source index, so row n + i*k + t came from source image i.
    """
    config.validate()
    if train.dim != model.dim:
        raise ValidationError(f"train dim {train.dim} != model dim {model.dim}")
    k = config.samples_per_image
    if k == 0 or train.count == 0:
        return train

    lower, upper = image_boxes(model, train.data)
    blocks = [
        _sample_rows(
            lower[i], upper[i], k, config.seed ^ i, config.renormalize_samples
        )
        for i in range(train.count)
    ]
    augmented = np.concatenate([train.data.astype(np.float64)] + blocks, axis=0)
    labels = np.concatenate([train.labels, np.repeat(train.labels, k)])
    return EmbeddingSet(
        augmented.astype(np.float32), labels, unit_norm=config.renormalize_samples
    )


def augmentation_manifest(train_count: int, config: AugmentationConfig) -> dict:
    """Sidecar description of an augmented set: config plus source indices."""
    k = config.samples_per_image
    return {
        "samples_per_image": k,
        "seed": config.seed,
        "renormalize_samples": config.renormalize_samples,
        "count_original": train_count,
        "count_augmented": train_count * k,
        "source_index": [i for i in range(train_count) for _ in range(k)],
    }
