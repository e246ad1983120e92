from typing import Any, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from ...classes.KeystrokeClassifier import CLASSIFIER_KINDS, KeystrokeClassifier, TrainingConfig
from ..eval_utils import TOP_KS, random_baseline
from ..logger import setup_logger, should_log_progress
from .build_dataset import ByteDataset
from .split_dataset import DatasetSplit, training_subset

logger = setup_logger(__name__)

TRAINING_FRACTIONS = (0.2, 0.4, 0.6, 0.8)
ML_GROUPINGS = ("overall", "prompt_kind", "hand")


def train_classifier(
    kind: str,
    dataset: ByteDataset,
    split: DatasetSplit,
    config: TrainingConfig = TrainingConfig(),
    train_indices: NDArray[np.int64] | None = None,
) -> KeystrokeClassifier:
    train = split.train if train_indices is None else train_indices
    model = KeystrokeClassifier(kind, dataset.n_features, config=config)
    model.fit(
        dataset.features[train],
        dataset.labels[train],
        dataset.features[split.val],
        dataset.labels[split.val],
    )
    return model


def topk_hits(model: KeystrokeClassifier, dataset: ByteDataset, indices: NDArray[np.int64]) -> pd.DataFrame:
    """One row per sample with its hand, prompt kind and a hit flag per k."""
    top = model.predict_topk(dataset.features[indices], max(TOP_KS))
    truth = dataset.labels[indices]
    df = pd.DataFrame(
        {
            "hand": dataset.hands[indices],
            "prompt_kind": dataset.prompt_kinds[indices],
            "user_id": dataset.user_ids[indices],
        }
    )
    for k in TOP_KS:
        df[f"top{k}"] = (top[:, :k] == truth[:, None]).any(axis=1)
    return df


def accuracy_table(model: KeystrokeClassifier, dataset: ByteDataset, indices: NDArray[np.int64]) -> pd.DataFrame:
    """Test top-k overall, per prompt kind and per hand, in the long metrics layout."""
    hits = topk_hits(model, dataset, indices)
    columns = [f"top{k}" for k in TOP_KS]
    tables: list[pd.DataFrame] = []
    for grouping in ML_GROUPINGS:
        if grouping == "overall":
            table = hits[columns].mean().to_frame().T
            table.insert(0, "group", "all")
            table.insert(1, "clicks", len(hits))
        else:
            grouped = hits.groupby(grouping, sort=True)
            table = grouped[columns].mean().reset_index().rename(columns={grouping: "group"})
            table.insert(1, "clicks", grouped.size().to_numpy())
        table["group"] = table["group"].astype(str)
        table.insert(0, "grouping", grouping)
        tables.append(table)
    result = pd.concat(tables, ignore_index=True)
    result.insert(0, "model", model.kind)
    return result


def model_comparison(
    dataset: ByteDataset,
    split: DatasetSplit,
    config: TrainingConfig = TrainingConfig(),
    kinds: Sequence[str] = CLASSIFIER_KINDS,
) -> tuple[pd.DataFrame, dict[str, KeystrokeClassifier]]:
    """Train every kind on the same split; overall test accuracy plus the random-guess row."""
    models: dict[str, KeystrokeClassifier] = {}
    tables: list[pd.DataFrame] = []
    for kind in kinds:
        logger.info_with_newline("Training %s on %s samples", kind, len(split.train))
        model = train_classifier(kind, dataset, split, config)
        models[kind] = model
        tables.append(accuracy_table(model, dataset, split.test))
    random_row: dict[str, Any] = {"model": "random", "grouping": "overall", "group": "all", "clicks": len(split.test)}
    for k in TOP_KS:
        random_row[f"top{k}"] = random_baseline(k)
    tables.append(pd.DataFrame([random_row]))
    return pd.concat(tables, ignore_index=True), models


def training_fraction_study(
    dataset: ByteDataset,
    split: DatasetSplit,
    kind: str = "mlp",
    config: TrainingConfig = TrainingConfig(),
    fractions: Sequence[float] = TRAINING_FRACTIONS,
) -> pd.DataFrame:
    """Test top-k after training on growing random fractions of the training split."""
    rows: list[dict[str, Any]] = []
    for i, fraction in enumerate(fractions, start=1):
        subset = training_subset(split.train, fraction, config.seed)
        model = train_classifier(kind, dataset, split, config, train_indices=subset)
        hits = topk_hits(model, dataset, split.test)
        row: dict[str, Any] = {"model": kind, "fraction": fraction, "train_samples": len(subset)}
        for k in TOP_KS:
            row[f"top{k}"] = float(hits[f"top{k}"].mean()) if len(hits) else 0.0
        rows.append(row)
        if should_log_progress(i, len(fractions)):
            logger.info("Fraction %.1f: top-1 %.4f", fraction, row["top1"])
    return pd.DataFrame(rows)
