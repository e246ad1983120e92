import argparse
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from ..classes.CalibrationReport import CalibrationReport
from ..classes.KeystrokeClassifier import CLASSIFIER_KINDS
from ..classes.LabConfig import LabConfig
from ..classes.MotionScript import load_truth
from ..classes.TraceFile import TraceFile
from ..utils.logger import log_script_complete, log_script_start, setup_logger
from ..utils.ml_utils import build_dataset, split_dataset, train_classifier, training_fraction_study

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trace", nargs="+", required=True, help="Trace files to build samples from")
    parser.add_argument("--truth", nargs="+", required=True, help="Truth JSON per trace, in the same order")
    parser.add_argument("--calibration", type=str, required=True, help="Calibration report (click-field locations)")
    parser.add_argument("--config", type=str, help="Lab config file (ML_* training keys)")
    parser.add_argument("--kind", nargs="+", default=["all"], help=f"Models to train: all or any of {CLASSIFIER_KINDS}")
    parser.add_argument("--seed", type=int, help="Split and training seed (defaults to SEED)")
    parser.add_argument("--output", type=str, help="Directory for dataset.npz, model-<kind>.npz and curves")
    parser.add_argument("--fraction-study", action="store_true", help="Also train the MLP on 20/40/60/80%% of train")


def main(
    trace: Sequence[str],
    truth: Sequence[str],
    calibration: str,
    config: Optional[str] = None,
    kind: Sequence[str] = ("all",),
    seed: Optional[int] = None,
    output: Optional[str] = None,
    fraction_study: bool = False,
) -> None:
    """Train byte-level keystroke classifiers on labelled traces."""
    log_script_start(__name__)
    if len(trace) != len(truth):
        raise ValueError(f"Got {len(trace)} traces but {len(truth)} truth files")
    kinds = list(CLASSIFIER_KINDS) if list(kind) == ["all"] else list(kind)
    invalid = [k for k in kinds if k not in CLASSIFIER_KINDS]
    if invalid:
        raise ValueError(f"Invalid model kinds: {invalid}")

    cfg = LabConfig.load(config)
    run_seed = cfg.seed if seed is None else seed
    calib = CalibrationReport.load(calibration)
    dataset = build_dataset(
        [TraceFile.load(p) for p in trace],
        [load_truth(p) for p in truth],
        calib.semantics,
        cfg.keyboard(),
        cfg.trigger_threshold,
        cfg.ml_features,
    )
    out = Path(output) if output else Path(cfg.output_dir) / "ml"
    out.mkdir(parents=True, exist_ok=True)
    dataset.save(out / "dataset.npz")
    split = split_dataset(dataset.labels, run_seed)
    training = cfg.training_config(run_seed)
    logger.info("Split: %s train / %s val / %s test", len(split.train), len(split.val), len(split.test))

    curves: list[pd.DataFrame] = []
    for model_kind in kinds:
        model = train_classifier(model_kind, dataset, split, training)
        model.save(out / f"model-{model_kind}.npz", extra={"split": split.to_dict(), "features": cfg.ml_features})
        history = model.history
        curves.append(
            pd.DataFrame(
                {
                    "model": model_kind,
                    "epoch": range(1, len(history.train_loss) + 1),
                    "train_loss": history.train_loss,
                    "val_accuracy": history.val_accuracy,
                }
            )
        )
    pd.concat(curves, ignore_index=True).to_csv(out / "curves.csv", index=False, float_format="%.6f")

    if fraction_study:
        training_fraction_study(dataset, split, "mlp", training).to_csv(
            out / "fractions.csv", index=False, float_format="%.6f"
        )

    log_script_complete(__name__, str(out), samples=len(dataset), models=",".join(kinds))


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Train keystroke classifiers on raw click bytes")
    add_arguments(parser)
    args = parser.parse_args()
    main(
        args.trace,
        args.truth,
        args.calibration,
        args.config,
        args.kind,
        args.seed,
        args.output,
        args.fraction_study,
    )
