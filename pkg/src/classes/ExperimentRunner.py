"""Scenario batteries: simulate, calibrate (cached), attack and evaluate per seed, then merge into CSVs.

Each seed runs in its own worker with its own directory under the bundle; the
parent merges per-seed tables in seed order and writes a manifest that is
enough to rerun the plan exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Mapping, Optional

import pandas as pd

from .. import __version__
from ..utils.eval_utils import TOP_KS, evaluate
from ..utils.logger import setup_logger, should_log_progress
from ..utils.ml_utils import build_dataset, model_comparison, split_dataset, training_fraction_study
from ..utils.prompt_utils import generate_prompt_battery
from .CalibrationReport import CalibrationReport
from .Calibrator import run_calibration
from .KeystrokeAttack import run_attack
from .LabConfig import LabConfig
from .MotionScript import MotionScript, TruthLabels
from .RoomSimulator import DEFAULT_BACKGROUND, run_session, session_echo
from .TraceFile import TraceFile, degrade_trace
from .Transform import Vec3
from .TypingSynthesizer import synthesize_session

logger = setup_logger(__name__)

SCENARIOS = ("single-victim", "multi-victim-4", "drop-sweep", "row-study", "speed-study", "ml-study")
DROP_SWEEP = (0.0, 0.05, 0.10, 0.15, 0.20)
VICTIM_SPACING = 1.2

# Config deltas each scenario starts from; plan overrides are applied on top
SCENARIO_DEFAULTS: dict[str, dict[str, Any]] = {
    "single-victim": {"USERS": 1},
    "multi-victim-4": {"USERS": 4},
    "drop-sweep": {"USERS": 1},
    "row-study": {"USERS": 1},
    "speed-study": {"USERS": 5},
    "ml-study": {"USERS": 2},
}

# Per-seed result columns that identify a row, in output order
SCENARIO_AXES: dict[str, list[str]] = {
    "single-victim": ["grouping", "group"],
    "multi-victim-4": ["grouping", "group"],
    "drop-sweep": ["drop_rate"],
    "row-study": ["group"],
    "speed-study": ["group"],
    "ml-study": ["table", "model", "grouping", "group", "fraction"],
}

ACCURACY_COLUMNS = [f"top{k}" for k in TOP_KS]
CSV_FLOAT_FORMAT = "%.6f"


@dataclass(frozen=True)
class ExperimentPlan:
    scenario: str
    seeds: tuple[int, ...]
    overrides: dict[str, Any] = field(default_factory=lambda: {})

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"Unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if not self.seeds:
            raise ValueError("An experiment plan needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"Duplicate seeds in plan: {list(self.seeds)}")

    def config(self, base: LabConfig) -> LabConfig:
        return base.with_overrides({**SCENARIO_DEFAULTS[self.scenario], **self.overrides})

    def to_dict(self) -> dict[str, Any]:
        return {"scenario": self.scenario, "seeds": list(self.seeds), "overrides": dict(self.overrides)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ExperimentPlan:
        return cls(
            scenario=str(data["scenario"]),
            seeds=tuple(int(s) for s in data["seeds"]),
            overrides=dict(data.get("overrides", {})),
        )


@dataclass
class ExperimentBundle:
    output_dir: Path
    tables: dict[str, pd.DataFrame]
    manifest: dict[str, Any]

    @property
    def manifest_path(self) -> Path:
        return self.output_dir / "manifest.json"


@dataclass
class Corpus:
    """One simulated session: the trace every victim shares plus each victim's truth labels."""

    trace: TraceFile
    truths: dict[int, TruthLabels]
    scripts: list[MotionScript]


def simulate_corpus(cfg: LabConfig, seed: int, cycle_speed: bool = False) -> Corpus:
    """Every victim types the seed's prompt battery in one shared room session.

    Victims stand VICTIM_SPACING apart along x. With cycle_speed, victim i types
    at speed quintile i mod 5 instead of the configured one.
    """
    kb = cfg.keyboard()
    registry = cfg.load_registry()
    codec = cfg.codec(registry)
    offset = cfg.cursor_offset()
    prompts = generate_prompt_battery(seed)
    if cfg.prompt_limit:
        prompts = prompts[: cfg.prompt_limit]

    scripts: list[MotionScript] = []
    victims = cfg.victim_ids
    for i, uid in enumerate(victims):
        profile = cfg.profile(i % 5 if cycle_speed else None)
        profile = replace(profile, head_position=Vec3(VICTIM_SPACING * i, 1.6, 0.0))
        scripts.append(synthesize_session(prompts, kb, profile, seed * 1000 + uid, offset, uid))
        logger.info("Victim %s/%s (user %s): %s clicks", i + 1, len(victims), uid, len(scripts[-1].labels))

    trace = run_session(
        cfg.room_config(seed),
        scripts,
        DEFAULT_BACKGROUND,
        registry,
        codec,
        cfg.start_time,
        session_echo(codec),
    )
    return Corpus(trace=trace, truths={s.user_id: s.truth() for s in scripts}, scripts=scripts)


def calibration_cache_path(cfg: LabConfig, cache_dir: Path) -> Path:
    return cache_dir / f"calibration-{cfg.calibration_hash()[:16]}.json"


def load_or_calibrate(cfg: LabConfig, cache_dir: Path) -> CalibrationReport:
    """Calibration depends only on the codec, rates, layout and offset, so it is reused across runs."""
    path = calibration_cache_path(cfg, cache_dir)
    if path.exists():
        logger.info("Using cached calibration %s", path)
        return CalibrationReport.load(path)
    report = run_calibration(cfg)
    cache_dir.mkdir(parents=True, exist_ok=True)
    report.save(path)
    return report


def _overall(metrics: pd.DataFrame) -> dict[str, Any]:
    row = metrics[metrics["grouping"] == "overall"].iloc[0]
    return {c: row[c] for c in ["clicks", *ACCURACY_COLUMNS]}


def _attack_rows(scenario: str, cfg: LabConfig, seed: int, calib: CalibrationReport, seed_dir: Path) -> pd.DataFrame:
    kb = cfg.keyboard()
    registry = cfg.load_registry()
    corpus = simulate_corpus(cfg, seed, cycle_speed=scenario == "speed-study")
    corpus.trace.save(seed_dir / "trace.vrt")

    if scenario == "drop-sweep":
        rows: list[dict[str, Any]] = []
        for rate in DROP_SWEEP:
            trace = degrade_trace(corpus.trace, rate, seed)
            result = evaluate(run_attack(trace, calib, kb, registry, cfg.trigger_threshold), corpus.truths)
            rows.append({"drop_rate": rate, **_overall(result.metrics)})
        return pd.DataFrame(rows)

    report = run_attack(corpus.trace, calib, kb, registry, cfg.trigger_threshold)
    report.save(seed_dir / "report.json")
    result = evaluate(report, corpus.truths)
    result.write_clicks_csv(seed_dir / "clicks.csv")
    metrics = result.metrics
    if scenario == "row-study":
        return metrics[metrics["grouping"] == "row"].drop(columns="grouping").reset_index(drop=True)
    if scenario == "speed-study":
        return metrics[metrics["grouping"] == "speed_percentile"].drop(columns="grouping").reset_index(drop=True)
    if scenario == "multi-victim-4":
        return metrics[metrics["grouping"].isin(["overall", "user_id"])].reset_index(drop=True)
    return metrics


def _ml_rows(cfg: LabConfig, seed: int, calib: CalibrationReport, seed_dir: Path) -> pd.DataFrame:
    corpus = simulate_corpus(cfg, seed)
    dataset = build_dataset(
        [corpus.trace], [corpus.truths], calib.semantics, cfg.keyboard(), cfg.trigger_threshold, cfg.ml_features
    )
    dataset.save(seed_dir / "dataset.npz")
    split = split_dataset(dataset.labels, seed)
    training = cfg.training_config(seed)

    comparison, models = model_comparison(dataset, split, training)
    for kind, model in models.items():
        model.save(seed_dir / f"model-{kind}.npz", extra={"split": split.to_dict(), "features": cfg.ml_features})
    comparison.insert(0, "table", "models")

    fractions = training_fraction_study(dataset, split, "mlp", training)
    fractions.insert(0, "table", "fractions")
    return pd.concat([comparison, fractions], ignore_index=True)


def run_seed(args: tuple[str, dict[str, str], int, str, str]) -> pd.DataFrame:
    """One seed of one scenario. Takes plain data so it can be shipped to a worker process."""
    scenario, values, seed, calibration_path, output_dir = args
    cfg = LabConfig.from_values(values)
    calib = CalibrationReport.load(calibration_path)
    seed_dir = Path(output_dir) / f"seed-{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)

    if scenario == "ml-study":
        table = _ml_rows(cfg, seed, calib, seed_dir)
    else:
        table = _attack_rows(scenario, cfg, seed, calib, seed_dir)
    table.insert(0, "seed", seed)
    table.to_csv(seed_dir / f"{scenario}.csv", index=False, float_format=CSV_FLOAT_FORMAT)
    return table


def _mean_over_seeds(scenario: str, by_seed: pd.DataFrame) -> pd.DataFrame:
    axes = [a for a in SCENARIO_AXES[scenario] if a in by_seed.columns]
    values = [c for c in ["clicks", "train_samples", *ACCURACY_COLUMNS] if c in by_seed.columns]
    keyed = by_seed.fillna({a: "" for a in axes})
    return keyed.groupby(axes, sort=False)[values].mean().reset_index()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(
    plan: ExperimentPlan,
    base: Optional[LabConfig] = None,
    output_dir: Optional[str | Path] = None,
    workers: Optional[int] = None,
) -> ExperimentBundle:
    base_cfg = base if base is not None else LabConfig()
    cfg = plan.config(base_cfg)
    out = Path(output_dir) if output_dir is not None else Path(cfg.output_dir) / plan.scenario
    out.mkdir(parents=True, exist_ok=True)
    n_workers = workers if workers is not None else cfg.workers

    logger.info_with_newline(
        "Experiment %s: %s seeds, config %s, %s workers", plan.scenario, len(plan.seeds), cfg.config_hash()[:12], n_workers
    )
    calib = load_or_calibrate(cfg, Path(cfg.output_dir) / "calibration")
    calibration_path = out / "calibration.json"
    calib.save(calibration_path)

    values = cfg.to_values()
    jobs = [(plan.scenario, values, seed, str(calibration_path), str(out)) for seed in plan.seeds]
    tables: list[pd.DataFrame] = []
    if n_workers > 1 and len(jobs) > 1:
        with Pool(processes=min(n_workers, len(jobs))) as pool:
            for i, table in enumerate(pool.imap(run_seed, jobs), start=1):
                tables.append(table)
                if should_log_progress(i, len(jobs)):
                    logger.info("Seed %s/%s merged", i, len(jobs))
    else:
        for i, job in enumerate(jobs, start=1):
            try:
                tables.append(run_seed(job))
            except Exception as e:
                raise RuntimeError(f"Scenario {plan.scenario} failed on seed {job[2]}: {e}") from e
            if should_log_progress(i, len(jobs)):
                logger.info("Seed %s/%s done", i, len(jobs))

    by_seed = pd.concat(tables, ignore_index=True)
    merged = _mean_over_seeds(plan.scenario, by_seed)
    outputs = {
        f"{plan.scenario}_by_seed.csv": by_seed,
        f"{plan.scenario}.csv": merged,
    }
    hashes: dict[str, str] = {}
    for name, table in outputs.items():
        path = out / name
        table.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        hashes[name] = _sha256(path)

    manifest: dict[str, Any] = {
        "plan": plan.to_dict(),
        "config": values,
        "config_hash": cfg.config_hash(),
        "calibration_hash": cfg.calibration_hash(),
        "calibration_sha256": calib.sha256(),
        "seeds": list(plan.seeds),
        "version": __version__,
        "outputs": hashes,
    }
    bundle = ExperimentBundle(output_dir=out, tables=outputs, manifest=manifest)
    bundle.manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2))
    logger.info("Wrote %s and manifest to %s", ", ".join(outputs), out)
    return bundle


def load_manifest(path: str | Path) -> tuple[ExperimentPlan, LabConfig, dict[str, Any]]:
    manifest = json.loads(Path(path).read_text())
    cfg = LabConfig.from_values(manifest["config"])
    if cfg.config_hash() != manifest["config_hash"]:
        raise ValueError(f"Manifest {path} config does not match its recorded hash")
    return ExperimentPlan.from_dict(manifest["plan"]), cfg, manifest


def rerun_from_manifest(
    path: str | Path, output_dir: Optional[str | Path] = None, workers: Optional[int] = None
) -> tuple[ExperimentBundle, list[str]]:
    """Rerun a recorded plan; returns the bundle and the names of outputs whose hashes differ."""
    plan, cfg, manifest = load_manifest(path)
    if manifest.get("version") != __version__:
        logger.warning("Manifest was written by version %s, running %s", manifest.get("version"), __version__)
    bundle = run_experiment(plan, cfg, output_dir, workers)
    mismatched = sorted(
        name for name, digest in manifest["outputs"].items() if bundle.manifest["outputs"].get(name) != digest
    )
    if mismatched:
        logger.warning("Rerun differs from manifest in: %s", mismatched)
    else:
        logger.info("Rerun reproduced all %s outputs byte for byte", len(manifest["outputs"]))
    return bundle, mismatched


def plan_seeds(first: int, count: int) -> tuple[int, ...]:
    return tuple(range(first, first + count))
