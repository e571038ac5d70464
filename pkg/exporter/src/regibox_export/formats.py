"""Writers for the RGBX/RGBT interchange formats.

Byte layouts (little-endian), matching the consumer side exactly:

  RGBX: magic "RGBX", u32 version=1, u32 count, u32 dim,
        count u32 labels, count*dim f32 payload.
  RGBT: magic "RGBT", u32 version=1, u32 n_classes, u32 dim,
        per class (u32 name_len + UTF-8 name), n_classes*dim f32 payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def write_rgbx(path: str | Path, data: np.ndarray, labels: np.ndarray) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u4")
    if data.ndim != 2 or labels.shape != (data.shape[0],):
        raise ValueError("need (count, dim) embeddings and one label per row")
    with open(path, "wb") as fh:
        fh.write(b"RGBX")
        fh.write(struct.pack("<III", FORMAT_VERSION, data.shape[0], data.shape[1]))
        fh.write(labels.tobytes())
        fh.write(data.tobytes())


def write_rgbt(path: str | Path, data: np.ndarray, class_names: list[str]) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2 or len(class_names) != data.shape[0]:
        raise ValueError("need (n_classes, dim) embeddings and one name per class")
    with open(path, "wb") as fh:
        fh.write(b"RGBT")
        fh.write(struct.pack("<III", FORMAT_VERSION, data.shape[0], data.shape[1]))
        for name in class_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(data.tobytes())
