import argparse
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..classes.KeystrokeClassifier import KeystrokeClassifier
from ..utils.eval_utils import TOP_KS, random_baseline
from ..utils.logger import log_script_complete, log_script_start, setup_logger
from ..utils.ml_utils import ByteDataset, DatasetSplit, accuracy_table

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", nargs="+", required=True, help="Model checkpoints (.npz)")
    parser.add_argument("--dataset", type=str, required=True, help="Dataset archive written by ml-train")
    parser.add_argument("--output", type=str, help="CSV path for the test accuracy table")


def main(model: Sequence[str], dataset: str, output: Optional[str] = None) -> None:
    """Test-split top-k per model, overall and per prompt kind and hand."""
    log_script_start(__name__)
    data = ByteDataset.load(dataset)
    tables: list[pd.DataFrame] = []
    for path in model:
        classifier, meta = KeystrokeClassifier.load(path)
        if "split" not in meta:
            raise ValueError(f"Checkpoint {path} carries no split indices")
        if classifier.n_features != data.n_features:
            raise ValueError(f"Checkpoint {path} expects {classifier.n_features} features, dataset has {data.n_features}")
        test = DatasetSplit.from_dict(meta["split"]).test
        table = accuracy_table(classifier, data, np.asarray(test, dtype=np.int64))
        tables.append(table)
        overall = table[table["grouping"] == "overall"].iloc[0]
        logger.info("%s: top-1 %.4f, top-5 %.4f", classifier.kind, overall["top1"], overall["top5"])

    result = pd.concat(tables, ignore_index=True)
    for k in TOP_KS:
        result[f"random_top{k}"] = random_baseline(k)
    path_out = Path(output) if output else Path(dataset).with_name("ml_eval.csv")
    result.to_csv(path_out, index=False, float_format="%.6f")
    log_script_complete(__name__, str(path_out), models=len(tables), test_samples=int(result["clicks"].iloc[0]))


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Evaluate keystroke classifier checkpoints")
    add_arguments(parser)
    args = parser.parse_args()
    main(args.model, args.dataset, args.output)
