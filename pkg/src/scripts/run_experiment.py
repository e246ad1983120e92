import argparse
from typing import Optional, Sequence

from ..classes.ExperimentRunner import SCENARIOS, ExperimentPlan, plan_seeds, rerun_from_manifest, run_experiment
from ..classes.LabConfig import LabConfig
from ..utils.logger import log_script_complete, log_script_start, setup_logger

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", choices=SCENARIOS, help="Scenario to run")
    parser.add_argument("--seeds", nargs="+", type=int, help="Explicit seed list")
    parser.add_argument("--n-seeds", type=int, default=1, help="Number of consecutive seeds from SEED")
    parser.add_argument("--config", type=str, help="Lab config file (KEY=VALUE)")
    parser.add_argument("--set", dest="overrides", nargs="*", default=[], metavar="KEY=VALUE", help="Config overrides for this plan")
    parser.add_argument("--manifest", type=str, help="Rerun the plan recorded in a manifest")
    parser.add_argument("--output", type=str, help="Bundle directory (defaults to OUTPUT_DIR/<scenario>)")
    parser.add_argument("--workers", type=int, help="Worker processes (defaults to WORKERS)")


def _parse_overrides(pairs: Sequence[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ValueError(f"Invalid override {pair!r}; expected KEY=VALUE")
        overrides[key.strip().upper()] = value.strip()
    return overrides


def main(
    scenario: Optional[str] = None,
    seeds: Optional[Sequence[int]] = None,
    n_seeds: int = 1,
    config: Optional[str] = None,
    overrides: Sequence[str] = (),
    manifest: Optional[str] = None,
    output: Optional[str] = None,
    workers: Optional[int] = None,
) -> None:
    """Run a scenario battery, or rerun one from its manifest."""
    log_script_start(__name__)
    if manifest:
        bundle, mismatched = rerun_from_manifest(manifest, output, workers)
        if mismatched:
            raise RuntimeError(f"Rerun of {manifest} did not reproduce: {mismatched}")
    else:
        if scenario is None:
            raise ValueError("--scenario is required unless --manifest is given")
        cfg = LabConfig.load(config)
        plan = ExperimentPlan(
            scenario=scenario,
            seeds=tuple(seeds) if seeds else plan_seeds(cfg.seed, n_seeds),
            overrides=_parse_overrides(overrides),
        )
        bundle = run_experiment(plan, cfg, output, workers)

    log_script_complete(
        __name__,
        str(bundle.output_dir),
        scenario=bundle.manifest["plan"]["scenario"],
        seeds=len(bundle.manifest["seeds"]),
        config_hash=bundle.manifest["config_hash"][:12],
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run an experiment scenario")
    add_arguments(parser)
    args = parser.parse_args()
    main(args.scenario, args.seeds, args.n_seeds, args.config, args.overrides, args.manifest, args.output, args.workers)
