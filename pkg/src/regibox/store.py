"""Embedding sets, class-text tables, and their on-disk formats.

Binary layouts (little-endian throughout):

  RGBX  embedding set: magic "RGBX", u32 version=1, u32 count, u32 dim,
        count u32 labels, then count*dim f32 payload.
  RGBT  class-text table: magic "RGBT", u32 version=1, u32 n_classes,
        u32 dim, per class (u32 name_len + UTF-8 name), then
        n_classes*dim f32 payload.

Rows are points on the unit hypersphere. Loaders accept a norm drift of
up to 1e-3 (float32 exports of normalized vectors drift) and renormalize
on construction, so downstream math always sees unit rows.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC_EMBEDDINGS = b"RGBX"
MAGIC_CLASS_TEXT = b"RGBT"
FORMAT_VERSION = 1

NORM_TOLERANCE = 1e-3
# Rows already within this of unit norm are kept bit-for-bit, which makes
# construction idempotent and file round-trips exact.
RENORM_THRESHOLD = 1e-5


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale every row to unit Euclidean norm, preserving direction."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {matrix.shape}")
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"cannot normalize zero row {zero[0]}")
    return matrix / norms[:, None]


def _conform_unit_rows(data: np.ndarray, what: str) -> np.ndarray:
    """Validate near-unit rows and renormalize the ones that drifted."""
    norms = np.linalg.norm(data.astype(np.float64), axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
    if bad.size:
        raise ValidationError(
            f"{what} row {bad[0]} has norm {norms[bad[0]]:.6g}, "
            f"outside 1 +/- {NORM_TOLERANCE}"
        )
    drifted = np.abs(norms - 1.0) > RENORM_THRESHOLD
    if drifted.any():
        data = data.copy()
        data[drifted] = (
            data[drifted].astype(np.float64) / norms[drifted, None]
        ).astype(np.float32)
    return data


@dataclass
class EmbeddingSet:
    """Unit-norm float32 embeddings with one integer class label per row."""

    data: np.ndarray
    labels: np.ndarray
    unit_norm: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(np.asarray(self.data), dtype=np.float32)
        labels = np.ascontiguousarray(np.asarray(self.labels), dtype=np.uint32)
        if data.ndim != 2:
            raise ValidationError(f"embedding data must be 2-D, got shape {data.shape}")
        if data.shape[1] < 1:
            raise ValidationError("embedding dim must be positive")
        if labels.ndim != 1 or labels.shape[0] != data.shape[0]:
            raise ValidationError(
                f"labels length {labels.shape} does not match count {data.shape[0]}"
            )
        if not np.isfinite(data).all():
            raise ValidationError("embedding data contains non-finite values")
        if self.unit_norm and data.shape[0]:
            data = _conform_unit_rows(data, "embedding")
        data.flags.writeable = False
        labels.flags.writeable = False
        self.data = data
        self.labels = labels

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def validate_labels(self, n_classes: int) -> None:
        if self.count and int(self.labels.max()) >= n_classes:
            raise ValidationError(
                f"label {int(self.labels.max())} out of range for {n_classes} classes"
            )


@dataclass
class ClassTextEmbeddings:
    """One unit-norm text embedding per class, with the class names."""

    data: np.ndarray
    class_names: list[str]

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(np.asarray(self.data), dtype=np.float32)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(
                f"class-text data must be (n_classes, dim) with both positive, got {data.shape}"
            )
        if len(self.class_names) != data.shape[0]:
            raise ValidationError(
                f"{len(self.class_names)} class names for {data.shape[0]} classes"
            )
        if not np.isfinite(data).all():
            raise ValidationError("class-text data contains non-finite values")
        data = _conform_unit_rows(data, "class-text")
        data.flags.writeable = False
        self.data = data
        self.class_names = list(self.class_names)

    @property
    def n_classes(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass
class DatasetBundle:
    """Train/val/test splits plus the class-text table they share."""

    train: EmbeddingSet
    val: EmbeddingSet
    test_in_domain: EmbeddingSet
    test_out_domain: EmbeddingSet | None
    class_text: ClassTextEmbeddings

    def __post_init__(self) -> None:
        sets = {
            "train": self.train,
            "val": self.val,
            "test_in_domain": self.test_in_domain,
        }
        if self.test_out_domain is not None:
            sets["test_out_domain"] = self.test_out_domain
        for name, part in sets.items():
            if part.dim != self.class_text.dim:
                raise ValidationError(
                    f"{name} dim {part.dim} != class-text dim {self.class_text.dim}"
                )
            part.validate_labels(self.class_text.n_classes)


def write_embedding_file(embeddings: EmbeddingSet, path: str | Path) -> None:
    """Write an RGBX file; refuses sets that violate the unit-norm invariant."""
    if embeddings.count:
        norms = np.linalg.norm(embeddings.data.astype(np.float64), axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
        if bad.size:
            raise ValidationError(
                f"refusing to write: row {bad[0]} has norm {norms[bad[0]]:.6g}"
            )
    payload = embeddings.data.astype("<f4", copy=False)
    labels = embeddings.labels.astype("<u4", copy=False)
    with open(path, "wb") as fh:
        fh.write(MAGIC_EMBEDDINGS)
        fh.write(struct.pack("<III", FORMAT_VERSION, embeddings.count, embeddings.dim))
        fh.write(labels.tobytes())
        fh.write(payload.tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file: expected {n} bytes of {what}, got {len(buf)}")
    return buf


def read_embedding_file(path: str | Path) -> EmbeddingSet:
    """Read and validate an RGBX file."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_EMBEDDINGS:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC_EMBEDDINGS!r}")
        version, count, dim = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format version {version}")
        if dim < 1:
            raise FormatError("dim must be positive")
        labels = np.frombuffer(_read_exact(fh, 4 * count, "labels"), dtype="<u4")
        data = np.frombuffer(
            _read_exact(fh, 4 * count * dim, "payload"), dtype="<f4"
        ).reshape(count, dim)
        trailing = fh.read(1)
        if trailing:
            raise FormatError("trailing bytes after payload")
    return EmbeddingSet(data=data, labels=labels)


def write_class_text_file(table: ClassTextEmbeddings, path: str | Path) -> None:
    """Write an RGBT file with length-prefixed UTF-8 class names."""
    with open(path, "wb") as fh:
        fh.write(MAGIC_CLASS_TEXT)
        fh.write(struct.pack("<III", FORMAT_VERSION, table.n_classes, table.dim))
        for name in table.class_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(table.data.astype("<f4", copy=False).tobytes())


def read_class_text_file(path: str | Path) -> ClassTextEmbeddings:
    """Read and validate an RGBT file."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_CLASS_TEXT:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC_CLASS_TEXT!r}")
        version, n_classes, dim = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format version {version}")
        if n_classes < 1 or dim < 1:
            raise FormatError("n_classes and dim must be positive")
        names = []
        for _ in range(n_classes):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "name length"))
            try:
                names.append(_read_exact(fh, name_len, "class name").decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise FormatError(f"class name is not valid UTF-8: {exc}") from exc
        data = np.frombuffer(
            _read_exact(fh, 4 * n_classes * dim, "payload"), dtype="<f4"
        ).reshape(n_classes, dim)
        trailing = fh.read(1)
        if trailing:
            raise FormatError("trailing bytes after payload")
    return ClassTextEmbeddings(data=data, class_names=names)


def split_train_val(
    embeddings: EmbeddingSet, val_fraction: float, seed: int
) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Deterministic disjoint split; val gets round(count * val_fraction) rows."""
    if not 0.0 < val_fraction < 1.0:
        raise ValidationError(f"val_fraction must be in (0, 1), got {val_fraction}")
    if embeddings.count < 2:
        raise ValidationError("need at least 2 rows to split")
    n_val = int(round(embeddings.count * val_fraction))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(embeddings.count)
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    train = EmbeddingSet(embeddings.data[train_idx], embeddings.labels[train_idx])
    val = EmbeddingSet(embeddings.data[val_idx], embeddings.labels[val_idx])
    return train, val
