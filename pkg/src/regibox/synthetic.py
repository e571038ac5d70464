"""Synthetic hypersphere-cluster datasets with a controllable domain shift.

Each class gets an orthonormal unit mean; samples are the mean plus
Gaussian noise (and optionally a fixed shift vector), renormalized onto
the sphere. The class-text table is set to the class means, so zero-shot
prediction against it is nearest-mean classification. This stands in for
real encoder exports when exercising the full pipeline at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .seeding import derive_seed
from .store import ClassTextEmbeddings, DatasetBundle, EmbeddingSet, normalize_rows


@dataclass
class SyntheticSpec:
    """Parameters for one synthetic draw.

    ``means_seed`` defaults to a value derived from ``seed``; bundle
    generation pins it so every split shares the same class means.
    """

    dim: int
    n_classes: int
    per_class: int
    spread_sigma: float | tuple[float, ...] = 0.1
    domain_shift: np.ndarray | None = None
    seed: int = 0
    means_seed: int | None = None

    def sigmas(self) -> np.ndarray:
        sig = np.atleast_1d(np.asarray(self.spread_sigma, dtype=np.float64))
        if sig.size == 1:
            sig = np.full(self.n_classes, float(sig[0]))
        if sig.size != self.n_classes:
            raise ValidationError(
                f"{sig.size} sigma values for {self.n_classes} classes"
            )
        if (sig < 0).any():
            raise ValidationError("spread_sigma must be non-negative")
        return sig

    def validate(self) -> None:
        if self.dim < 1 or self.n_classes < 1:
            raise ValidationError("dim and n_classes must be positive")
        if self.per_class < 1:
            raise ValidationError("per_class must be at least 1")
        if self.dim < self.n_classes:
            raise ValidationError(
                f"orthogonal class means need dim >= n_classes, got {self.dim} < {self.n_classes}"
            )
        self.sigmas()
        if self.domain_shift is not None:
            shift = np.asarray(self.domain_shift, dtype=np.float64)
            if shift.shape != (self.dim,):
                raise ValidationError(f"domain_shift must have shape ({self.dim},)")
            if not np.isfinite(shift).all():
                raise ValidationError("domain_shift must be finite")


def class_means(dim: int, n_classes: int, seed: int) -> np.ndarray:
    """Seeded orthonormal unit vectors, one per class (requires dim >= n_classes)."""
    if dim < n_classes:
        raise ValidationError(
            f"orthogonal class means need dim >= n_classes, got {dim} < {n_classes}"
        )
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((dim, n_classes))
    q, _ = np.linalg.qr(gauss)
    return np.ascontiguousarray(q.T)


def default_class_names(n_classes: int) -> list[str]:
    width = len(str(max(n_classes - 1, 0)))
    return [f"class_{i:0{width}d}" for i in range(n_classes)]


def generate(spec: SyntheticSpec) -> tuple[EmbeddingSet, ClassTextEmbeddings]:
    """Draw one labeled sample set plus the matching class-text table."""
    spec.validate()
    means_seed = (
        spec.means_seed
        if spec.means_seed is not None
        else derive_seed(spec.seed, "class-means")
    )
    means = class_means(spec.dim, spec.n_classes, means_seed)
    sigmas = spec.sigmas()
    rng = np.random.default_rng(derive_seed(spec.seed, "samples"))

    labels = np.repeat(np.arange(spec.n_classes, dtype=np.uint32), spec.per_class)
    noise = rng.standard_normal((labels.size, spec.dim)) * sigmas[labels][:, None]
    points = means[labels] + noise
    if spec.domain_shift is not None:
        points = points + np.asarray(spec.domain_shift, dtype=np.float64)[None, :]
    norms = np.linalg.norm(points, axis=1)
    if (norms == 0.0).any():
        raise ValidationError("a sample collapsed to the zero vector; adjust the shift")
    points /= norms[:, None]

    embeddings = EmbeddingSet(points.astype(np.float32), labels)
    class_text = ClassTextEmbeddings(
        means.astype(np.float32), default_class_names(spec.n_classes)
    )
    return embeddings, class_text


def shift_domain(embeddings: EmbeddingSet, shift: np.ndarray) -> EmbeddingSet:
    """Add ``shift`` to every row and renormalize; labels are unchanged."""
    shift = np.asarray(shift, dtype=np.float64)
    if shift.shape != (embeddings.dim,):
        raise ValidationError(f"shift must have shape ({embeddings.dim},)")
    if not np.isfinite(shift).all():
        raise ValidationError("shift must be finite")
    moved = embeddings.data.astype(np.float64) + shift[None, :]
    norms = np.linalg.norm(moved, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"row {zero[0]} shifted onto the zero vector")
    moved /= norms[:, None]
    return EmbeddingSet(moved.astype(np.float32), embeddings.labels)


def shift_vector(dim: int, magnitude: float, seed: int) -> np.ndarray:
    """A fixed random direction scaled to ``magnitude``; the synthetic domain shift."""
    rng = np.random.default_rng(derive_seed(seed, "shift-direction"))
    direction = rng.standard_normal(dim)
    return direction / np.linalg.norm(direction) * magnitude


@dataclass
class BundleSpec:
    """Parameters for a full synthetic train/val/test bundle."""

    dim: int
    n_classes: int
    per_class: int
    spread_sigma: float | tuple[float, ...] = 0.1
    seed: int = 0
    val_per_class: int | None = None
    test_per_class: int | None = None
    shift_magnitude: float = 0.5
    shift: np.ndarray | None = field(default=None, repr=False)

    def resolved_shift(self) -> np.ndarray:
        if self.shift is not None:
            return np.asarray(self.shift, dtype=np.float64)
        return shift_vector(self.dim, self.shift_magnitude, self.seed)


def generate_bundle(spec: BundleSpec) -> DatasetBundle:
    """Build train/val/in-domain/out-of-domain splits over shared class means.

    All four splits use the same seeded means (hence the same class-text
    table); only the out-of-domain test set gets the shift vector applied
    before renormalization.
    """
    val_n = spec.val_per_class or max(1, spec.per_class // 4)
    test_n = spec.test_per_class or spec.per_class
    shared_means_seed = derive_seed(spec.seed, "class-means")

    def draw(per_class: int, role: str, shift: np.ndarray | None):
        return generate(
            SyntheticSpec(
                dim=spec.dim,
                n_classes=spec.n_classes,
                per_class=per_class,
                spread_sigma=spec.spread_sigma,
                domain_shift=shift,
                seed=derive_seed(spec.seed, role),
                means_seed=shared_means_seed,
            )
        )

    train, class_text = draw(spec.per_class, "train", None)
    val, _ = draw(val_n, "val", None)
    test_in, _ = draw(test_n, "test-in", None)
    test_out, _ = draw(test_n, "test-out", spec.resolved_shift())
    return DatasetBundle(
        train=train,
        val=val,
        test_in_domain=test_in,
        test_out_domain=test_out,
        class_text=class_text,
    )
