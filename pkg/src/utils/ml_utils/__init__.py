from .build_dataset import FEATURE_MODES, ByteDataset, blob_features, build_dataset
from .ml_study import (
    ML_GROUPINGS,
    TRAINING_FRACTIONS,
    accuracy_table,
    model_comparison,
    topk_hits,
    train_classifier,
    training_fraction_study,
)
from .split_dataset import SPLIT_RATIOS, DatasetSplit, split_dataset, training_subset

__all__ = [
    "ByteDataset",
    "DatasetSplit",
    "FEATURE_MODES",
    "ML_GROUPINGS",
    "SPLIT_RATIOS",
    "TRAINING_FRACTIONS",
    "accuracy_table",
    "blob_features",
    "build_dataset",
    "model_comparison",
    "split_dataset",
    "topk_hits",
    "train_classifier",
    "training_fraction_study",
    "training_subset",
]
