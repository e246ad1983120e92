import argparse
from pathlib import Path
from typing import Optional

from ..classes.CalibrationReport import CalibrationReport
from ..classes.KeystrokeAttack import run_attack
from ..classes.LabConfig import LabConfig
from ..classes.TraceFile import TraceFile
from ..utils.logger import log_script_complete, log_script_start, setup_logger

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trace", type=str, required=True, help="Captured trace file")
    parser.add_argument("--calibration", type=str, required=True, help="Calibration report JSON")
    parser.add_argument("--config", type=str, help="Lab config file (layout, registry, threshold)")
    parser.add_argument("--output", type=str, help="Where to write the keystroke report JSON")


def main(trace: str, calibration: str, config: Optional[str] = None, output: Optional[str] = None) -> None:
    """Infer every victim's keystrokes from a trace."""
    log_script_start(__name__)
    cfg = LabConfig.load(config)
    captured = TraceFile.load(trace)
    calib = CalibrationReport.load(calibration)

    report = run_attack(captured, calib, cfg.keyboard(), cfg.load_registry(), cfg.trigger_threshold)

    path = Path(output) if output else Path(trace).with_name("report.json")
    report.save(path)
    log_script_complete(__name__, str(path), users=len(report.users), clicks=report.click_count())


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run the keystroke inference attack on a trace")
    add_arguments(parser)
    args = parser.parse_args()
    main(args.trace, args.calibration, args.config, args.output)
