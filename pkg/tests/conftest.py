import numpy as np
import pytest

from regibox.store import ClassTextEmbeddings, EmbeddingSet


def unit_rows(rng, n, d):
    rows = rng.standard_normal((n, d))
    return rows / np.linalg.norm(rows, axis=1)[:, None]


def make_set(rng, n, d, n_classes):
    return EmbeddingSet(
        unit_rows(rng, n, d).astype(np.float32),
        rng.integers(0, n_classes, n).astype(np.uint32),
    )


def make_class_text(rng, n_classes, d):
    return ClassTextEmbeddings(
        unit_rows(rng, n_classes, d).astype(np.float32),
        [f"class_{i}" for i in range(n_classes)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
