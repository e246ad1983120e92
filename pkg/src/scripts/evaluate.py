import argparse
import json
from pathlib import Path
from typing import Optional

from ..classes.KeystrokeAttack import KeystrokeReport
from ..classes.MotionScript import load_truth
from ..utils.eval_utils import evaluate
from ..utils.logger import log_script_complete, log_script_start, setup_logger

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--report", type=str, required=True, help="Keystroke report JSON")
    parser.add_argument("--truth", type=str, required=True, help="Ground-truth labels JSON")
    parser.add_argument("--output", type=str, help="Directory for metrics.csv, clicks.csv, prompts.csv")
    parser.add_argument(
        "--by-order",
        action="store_true",
        help="Align clicks to labels by order instead of by press interval",
    )


def main(report: str, truth: str, output: Optional[str] = None, by_order: bool = False) -> None:
    """Top-k accuracy of a keystroke report against ground truth."""
    log_script_start(__name__)
    result = evaluate(KeystrokeReport.load(report), load_truth(truth), by_interval=not by_order)

    out = Path(output) if output else Path(report).parent
    out.mkdir(parents=True, exist_ok=True)
    result.write_csv(out / "metrics.csv")
    result.write_clicks_csv(out / "clicks.csv")
    result.prompts.to_csv(out / "prompts.csv", index=False, float_format="%.6f")
    (out / "summary.json").write_text(json.dumps(result.summary, sort_keys=True, indent=2))

    log_script_complete(
        __name__,
        str(out),
        clicks=result.summary["clicks"],
        top1=f"{result.summary['top1']:.4f}",
        top5=f"{result.summary['top5']:.4f}",
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Evaluate a keystroke report")
    add_arguments(parser)
    args = parser.parse_args()
    main(args.report, args.truth, args.output, args.by_order)
