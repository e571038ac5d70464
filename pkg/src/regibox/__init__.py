"""Latent-region embedding augmentation over unit-norm embedding spaces.

Train a network that turns each image embedding into a latent box, sample
augmented embeddings from the boxes, and fine-tune a linear probe that
holds up better on shifted domains. Includes region analytics, a synthetic
oracle dataset, binary interchange formats, and a CLI (``regibox``).
"""

import os as _os

# Cap math-library thread pools before numpy is first imported; only
# effective when this package is imported before numpy itself.
_threads = _os.environ.get("REGIBOX_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)

from .analytics import (
    EvalReport,
    Protocol,
    RegionStats,
    accuracy,
    extended_accuracy,
    rank_classes_by_dimension,
    rank_classes_by_volume,
    region_stats,
    run_protocol,
)
from .boxnet import (
    BoxNetModel,
    Gradients,
    LatentBox,
    Stage1Config,
    TrainTrace,
    backward,
    box_volume_loss,
    class_consistency_loss,
    combined_loss,
    corner_class_accuracy,
    corners_from_raw,
    forward,
    image_boxes,
    init_model,
    load_model,
    save_model,
    train_stage1,
)
from .errors import FormatError, NumericError, RegiboxError, ValidationError
from .probe import (
    ProbeConfig,
    ProbeModel,
    load_probe,
    predict,
    save_probe,
    train_probe,
    zero_shot_predict,
)
from .sampler import AugmentationConfig, augment_dataset, sample_from_box
from .seeding import derive_seed
from .store import (
    ClassTextEmbeddings,
    DatasetBundle,
    EmbeddingSet,
    normalize_rows,
    read_class_text_file,
    read_embedding_file,
    split_train_val,
    write_class_text_file,
    write_embedding_file,
)
from .synthetic import (
    BundleSpec,
    SyntheticSpec,
    generate,
    generate_bundle,
    shift_domain,
    shift_vector,
)

__version__ = "0.1.0"
