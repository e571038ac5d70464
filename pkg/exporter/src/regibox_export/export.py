"""Turn a folder-per-class image tree and class prompts into RGBX/RGBT files.

Class indices follow the lexicographic order of the class folder names;
the mapping is recorded in a JSON manifest next to each output. Images
that cannot be decoded are skipped with a warning and a manifest entry.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import get_encoder
from .formats import write_rgbt, write_rgbx

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp")
DEFAULT_TEMPLATE = "A photo of a [label]"


@dataclass
class ExportSpec:
    """What to encode and where to write it."""

    image_root: str | Path
    model: str = "toy:16"
    prompt_template: str = DEFAULT_TEMPLATE
    images_out: str | Path | None = None
    class_text_out: str | Path | None = None
    batch_size: int = 32
    device: str = "cpu"
    class_names: list[str] | None = field(default=None)

    def validate_template(self) -> None:
        if "[label]" not in self.prompt_template:
            raise ValueError(
                f"prompt template must contain '[label]', got {self.prompt_template!r}"
            )


def scan_class_folders(root: str | Path) -> dict[str, list[Path]]:
    """Lexicographically ordered class folders and their image files."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"image root {root} is not a directory")
    folders = sorted(p for p in root.iterdir() if p.is_dir())
    if not folders:
        raise ValueError(f"image root {root} has no class folders")
    classes: dict[str, list[Path]] = {}
    for folder in folders:
        files = sorted(
            p for p in folder.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise ValueError(f"class folder {folder} contains no images")
        classes[folder.name] = files
    return classes


def _write_manifest(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def export_images(spec: ExportSpec) -> Path:
    """Encode every class-folder image into one unit-norm RGBX row."""
    classes = scan_class_folders(spec.image_root)
    encoder = get_encoder(spec.model, device=spec.device, batch_size=spec.batch_size)

    images: list[Image.Image] = []
    labels: list[int] = []
    kept: list[str] = []
    skipped: list[str] = []
    for index, (name, files) in enumerate(classes.items()):
        for file in files:
            try:
                with Image.open(file) as img:
                    images.append(img.convert("RGB"))
            except (UnidentifiedImageError, OSError) as exc:
                warnings.warn(f"skipping undecodable image {file}: {exc}")
                skipped.append(str(file))
                continue
            labels.append(index)
            kept.append(str(file))
    if not images:
        raise ValueError("no decodable images found")

    rows = encoder.encode_images(images)
    out = Path(spec.images_out or Path(spec.image_root) / "images.rgbx")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_rgbx(out, rows.astype(np.float32), np.asarray(labels, dtype=np.uint32))
    _write_manifest(
        Path(f"{out}.manifest.json"),
        {
            "model": spec.model,
            "classes": list(classes),
            "count": len(kept),
            "files": kept,
            "skipped": skipped,
        },
    )
    return out


def export_class_text(spec: ExportSpec) -> Path:
    """Encode one prompt per class into an RGBT table."""
    spec.validate_template()
    if spec.class_names is not None:
        names = list(spec.class_names)
        if not names:
            raise ValueError("class list is empty")
    else:
        names = list(scan_class_folders(spec.image_root))
    prompts = [spec.prompt_template.replace("[label]", name) for name in names]
    encoder = get_encoder(spec.model, device=spec.device, batch_size=spec.batch_size)
    rows = encoder.encode_texts(prompts)
    out = Path(spec.class_text_out or Path(spec.image_root) / "class_text.rgbt")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_rgbt(out, rows.astype(np.float32), names)
    _write_manifest(
        Path(f"{out}.manifest.json"),
        {"model": spec.model, "classes": names, "prompt_template": spec.prompt_template},
    )
    return out
