import argparse
import inspect
import time
from types import ModuleType
from typing import Any, Callable

from src.scripts import (
    attack,
    calibrate,
    evaluate,
    ml_eval,
    ml_train,
    run_experiment,
    simulate,
    validate_config,
)
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

COMMAND_MODULES: dict[str, ModuleType] = {
    "simulate": simulate,
    "calibrate": calibrate,
    "attack": attack,
    "evaluate": evaluate,
    "ml-train": ml_train,
    "ml-eval": ml_eval,
    "run-experiment": run_experiment,
    "validate-config": validate_config,
}

COMMAND_MAP: dict[str, Callable[..., None]] = {name: module.main for name, module in COMMAND_MODULES.items()}


def run_command(command: str, **kwargs: Any) -> None:
    """Run one subcommand by name, passing only the keyword arguments its main() accepts."""
    if command not in COMMAND_MAP:
        raise ValueError(f"Invalid command name: {command!r}; expected one of {sorted(COMMAND_MAP)}")

    func = COMMAND_MAP[command]
    supported_params = set(inspect.signature(func).parameters)
    filtered_kwargs = {k: v for k, v in kwargs.items() if k in supported_params}

    logger.info("=" * 60)
    logger.info("Command: %s", command)
    logger.info("Arguments: %s", filtered_kwargs)
    logger.info("=" * 60)
    logger.newline()

    started = time.perf_counter()
    try:
        func(**filtered_kwargs)
    except Exception as e:
        logger.error("✗ Failed: %s - Error: %s", command, str(e))
        logger.exception(e)
        raise RuntimeError(f"Command failed: {command}") from e

    logger.newline()
    logger.info("=" * 60)
    logger.info("✓ Successfully completed: %s in %.1fs", command, time.perf_counter() - started)
    logger.info("=" * 60)


def main() -> None:
    """CLI entry point."""
    parser = argparse.ArgumentParser(description="VR keystroke inference lab")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, module in COMMAND_MODULES.items():
        sub = subparsers.add_parser(name, help=(module.main.__doc__ or "").strip().splitlines()[0])
        module.add_arguments(sub)

    args = vars(parser.parse_args())
    command = args.pop("command")
    run_command(command, **args)


if __name__ == "__main__":
    main()
