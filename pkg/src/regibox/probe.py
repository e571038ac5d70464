"""Linear classifier over embeddings, plus the zero-shot baseline.

The probe is a single softmax layer trained with AdamW on mean
cross-entropy. Zero-shot prediction needs no training at all: argmax of
the similarities to the class-text rows.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .optim import AdamW
from .seeding import derive_seed
from .store import ClassTextEmbeddings, EmbeddingSet

MAGIC_PROBE = b"RGBP"
PROBE_FORMAT_VERSION = 1


@dataclass
class ProbeModel:
    """Linear layer: logits = x @ weights.T + bias."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValidationError("probe weights must be (n_classes, dim)")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValidationError("probe bias must have one entry per class")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValidationError("probe parameters must be finite")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class ProbeConfig:
    """Training settings for the linear probe."""

    epochs: int = 100
    batch_size: int = 512
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    seed: int = 0
    early_stop: bool = True
    use_bias: bool = True

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")


def _logits(model: ProbeModel, x: np.ndarray) -> np.ndarray:
    return x @ model.weights.T + model.bias


def predict(model: ProbeModel, embeddings: EmbeddingSet) -> np.ndarray:
    """Argmax class per row; ties go to the lower class index."""
    if embeddings.dim != model.dim:
        raise ValidationError(f"set dim {embeddings.dim} != probe dim {model.dim}")
    return np.argmax(_logits(model, embeddings.data.astype(np.float64)), axis=1)


def zero_shot_predict(
    class_text: ClassTextEmbeddings, embeddings: EmbeddingSet
) -> np.ndarray:
    """Most-similar class-text row per embedding; ties to the lower index."""
    if embeddings.dim != class_text.dim:
        raise ValidationError(
            f"set dim {embeddings.dim} != class-text dim {class_text.dim}"
        )
    sims = embeddings.data.astype(np.float64) @ class_text.data.astype(np.float64).T
    return np.argmax(sims, axis=1)


def train_probe(
    data: EmbeddingSet,
    val: EmbeddingSet,
    n_classes: int,
    config: ProbeConfig,
) -> ProbeModel:
    """Minimize mean cross-entropy with decoupled weight decay.

    With early_stop on, returns the epoch checkpoint with the best
    validation accuracy (ties to the later epoch); otherwise the
    final-epoch model.
    """
    config.validate()
    if data.count == 0:
        raise ValidationError("empty training set")
    if n_classes < 1:
        raise ValidationError("n_classes must be positive")
    data.validate_labels(n_classes)
    if val.count:
        val.validate_labels(n_classes)
        if val.dim != data.dim:
            raise ValidationError("val dim must match train dim")

    x = data.data.astype(np.float64)
    y = data.labels.astype(np.intp)
    model = ProbeModel(
        weights=np.zeros((n_classes, data.dim)), bias=np.zeros(n_classes)
    )
    optimizer = AdamW(
        learning_rate=config.learning_rate, weight_decay=config.weight_decay
    )
    rng = np.random.default_rng(derive_seed(config.seed, "probe-shuffle"))

    best_acc = -np.inf
    best: ProbeModel | None = None
    n = data.count
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            logits = _logits(model, x[idx])
            shift = logits.max(axis=1, keepdims=True)
            probs = np.exp(logits - shift)
            probs /= probs.sum(axis=1, keepdims=True)
            probs[np.arange(idx.size), y[idx]] -= 1.0
            probs /= idx.size
            grad_w = probs.T @ x[idx]
            params = [model.weights]
            grads = [grad_w]
            if config.use_bias:
                params.append(model.bias)
                grads.append(probs.sum(axis=0))
            optimizer.step(params, grads)
        if config.early_stop and val.count:
            preds = predict(model, val)
            acc = float((preds == val.labels.astype(np.intp)).mean())
            if acc >= best_acc:
                best_acc = acc
                best = ProbeModel(model.weights.copy(), model.bias.copy())

    if config.early_stop and best is not None:
        return best
    return model


def save_probe(model: ProbeModel, path: str | Path, has_bias: bool = True) -> None:
    """Write an RGBP checkpoint (f32, little-endian)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC_PROBE)
        fh.write(
            struct.pack(
                "<IIII",
                PROBE_FORMAT_VERSION,
                model.n_classes,
                model.dim,
                1 if has_bias else 0,
            )
        )
        fh.write(model.weights.astype("<f4").tobytes())
        if has_bias:
            fh.write(model.bias.astype("<f4").tobytes())


def load_probe(path: str | Path) -> ProbeModel:
    """Read an RGBP checkpoint written by save_probe."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_PROBE:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC_PROBE!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise FormatError("truncated probe header")
        version, n_classes, dim, has_bias = struct.unpack("<IIII", header)
        if version != PROBE_FORMAT_VERSION:
            raise FormatError(f"unsupported probe format version {version}")
        if n_classes < 1 or dim < 1:
            raise FormatError("n_classes and dim must be positive")
        w_raw = fh.read(4 * n_classes * dim)
        if len(w_raw) != 4 * n_classes * dim:
            raise FormatError("truncated probe weights")
        weights = np.frombuffer(w_raw, dtype="<f4").reshape(n_classes, dim)
        if has_bias:
            b_raw = fh.read(4 * n_classes)
            if len(b_raw) != 4 * n_classes:
                raise FormatError("truncated probe bias")
            bias = np.frombuffer(b_raw, dtype="<f4").astype(np.float64)
        else:
            bias = np.zeros(n_classes)
        if fh.read(1):
            raise FormatError("trailing bytes after parameters")
    return ProbeModel(weights=weights.astype(np.float64), bias=bias)


def write_predictions_csv(
    path: str | Path, labels: np.ndarray, predictions: np.ndarray
) -> None:
    """Rows of (index, label, prediction)."""
    if len(labels) != len(predictions):
        raise ValidationError("labels and predictions must have equal length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label", "prediction"])
        for i, (lab, pred) in enumerate(zip(labels, predictions)):
            writer.writerow([i, int(lab), int(pred)])
