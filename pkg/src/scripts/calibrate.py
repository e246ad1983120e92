import argparse
from pathlib import Path
from typing import Optional

from ..classes.Calibrator import run_calibration
from ..classes.ExperimentRunner import load_or_calibrate
from ..classes.LabConfig import LabConfig
from ..utils.logger import log_script_complete, log_script_start, setup_logger

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="Lab config file (KEY=VALUE)")
    parser.add_argument("--output", type=str, help="Where to write the calibration report JSON")
    parser.add_argument("--no-cache", action="store_true", help="Recalibrate even if a cached report exists")


def main(config: Optional[str] = None, output: Optional[str] = None, no_cache: bool = False) -> None:
    """Recover field semantics, cursor offset and keyboard pose rule."""
    log_script_start(__name__)
    cfg = LabConfig.load(config)
    if no_cache:
        report = run_calibration(cfg)
    else:
        report = load_or_calibrate(cfg, Path(cfg.output_dir) / "calibration")

    path = Path(output) if output else cfg.output_path("calibration.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    report.save(path)

    for name, value in sorted(report.residuals.items()):
        logger.info("Residual %s: %.3g", name, value)
    log_script_complete(
        __name__,
        str(path),
        channels=len(report.semantics.channels),
        sha256=report.sha256()[:12],
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Calibrate against the simulated application")
    add_arguments(parser)
    args = parser.parse_args()
    main(args.config, args.output, args.no_cache)
