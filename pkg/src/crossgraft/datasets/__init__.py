from .types import (
    ALL_NAMES,
    BASE_NAMES,
    DERIVED_NAMES,
    IMAGE_SIZE,
    NUM_CLASSES,
    ArrayDataset,
    BatchFeed,
    DatasetSpec,
    LabelAudit,
    LabeledBatch,
    eval_batches,
    to_tensor,
)
from .shifts import blend_batch, compose_multi_digit, load_background_pool, procedural_texture_pool
from .store import (
    default_data_dir,
    expected_size,
    load_base,
    load_dataset,
    make_blended_domain,
    make_m_digits,
    prepare,
)

__all__ = [
    "ALL_NAMES",
    "BASE_NAMES",
    "DERIVED_NAMES",
    "IMAGE_SIZE",
    "NUM_CLASSES",
    "ArrayDataset",
    "BatchFeed",
    "DatasetSpec",
    "LabelAudit",
    "LabeledBatch",
    "eval_batches",
    "to_tensor",
    "blend_batch",
    "compose_multi_digit",
    "load_background_pool",
    "procedural_texture_pool",
    "default_data_dir",
    "expected_size",
    "load_base",
    "load_dataset",
    "make_blended_domain",
    "make_m_digits",
    "prepare",
]
