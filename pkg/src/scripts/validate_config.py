import argparse
from pathlib import Path
from typing import Optional

from ..classes.LabConfig import validate_config
from ..utils.errors import ConfigError
from ..utils.logger import log_script_complete, log_script_start, setup_logger

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="Config file to check (omit for defaults)")
    parser.add_argument("--output", type=str, help="Write the normalized config here")


def main(config: Optional[str] = None, output: Optional[str] = None) -> None:
    """Check a config file and print it with every default filled in."""
    log_script_start(__name__)
    try:
        cfg = validate_config(config)
    except ConfigError as e:
        for diagnostic in e.diagnostics:
            logger.error("%s", diagnostic)
        raise

    text = cfg.to_text()
    if output:
        Path(output).write_text(text)
    else:
        for line in text.splitlines():
            logger.info("%s", line)
    log_script_complete(__name__, output or "<stdout>", config_hash=cfg.config_hash()[:12])


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Validate a lab config file")
    add_arguments(parser)
    args = parser.parse_args()
    main(args.config, args.output)
