"""Bridge real image datasets to the embedding pipeline's file formats."""

from .encoders import HFClipEncoder, ToyDualEncoder, get_encoder
from .export import (
    DEFAULT_TEMPLATE,
    ExportSpec,
    export_class_text,
    export_images,
    scan_class_folders,
)
from .formats import write_rgbt, write_rgbx

__version__ = "0.1.0"
