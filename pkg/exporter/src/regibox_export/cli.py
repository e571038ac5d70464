"""CLI with the two export commands: export-images and export-text."""

from __future__ import annotations

import argparse
import sys

from .export import DEFAULT_TEMPLATE, ExportSpec, export_class_text, export_images


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regibox-export",
        description="encode image folders and class prompts into RGBX/RGBT files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    images = sub.add_parser("export-images", help="encode a folder-per-class image tree")
    images.add_argument("--root", required=True, help="image root (one folder per class)")
    images.add_argument("--model", default="toy:16", help="toy[:dim] or hf-clip:<model-id>")
    images.add_argument("--out", required=True, help="output RGBX file")
    images.add_argument("--batch-size", type=int, default=32)
    images.add_argument("--device", default="cpu")

    text = sub.add_parser("export-text", help="encode one prompt per class")
    text.add_argument("--root", required=True, help="image root (class names from folders)")
    text.add_argument("--model", default="toy:16", help="toy[:dim] or hf-clip:<model-id>")
    text.add_argument("--out", required=True, help="output RGBT file")
    text.add_argument("--template", default=DEFAULT_TEMPLATE, help="prompt, must contain [label]")
    text.add_argument("--batch-size", type=int, default=32)
    text.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    spec = ExportSpec(
        image_root=args.root,
        model=args.model,
        prompt_template=getattr(args, "template", DEFAULT_TEMPLATE),
        images_out=args.out if args.command == "export-images" else None,
        class_text_out=args.out if args.command == "export-text" else None,
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        if args.command == "export-images":
            out = export_images(spec)
        else:
            out = export_class_text(spec)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
