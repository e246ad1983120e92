import json
from pathlib import Path

import pandas as pd
import pytest

from src.classes.CalibrationReport import CalibrationReport
from src.classes.ExperimentRunner import (
    DROP_SWEEP,
    ExperimentPlan,
    calibration_cache_path,
    load_manifest,
    load_or_calibrate,
    plan_seeds,
    rerun_from_manifest,
    run_experiment,
    run_seed,
    simulate_corpus,
)
from src.classes.KeyboardModel import DEFAULT_POSE_RULE
from src.classes.LabConfig import LabConfig
from src.classes.MotionUpdate import ground_truth_semantics
from src.classes.Packet import parse_packet
from src.classes.RoomSimulator import RoomConfig
from src.classes.TraceFile import TraceFile, TraceRecord
from src.classes.TypingSynthesizer import DEFAULT_CURSOR_OFFSET
from src.utils.errors import MalformedPacket


@pytest.fixture
def small(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> LabConfig:
    monkeypatch.chdir(tmp_path)
    return LabConfig().with_overrides({"PROMPT_LIMIT": 2, "OUTPUT_DIR": str(tmp_path / "out")})


def _cache_oracle_calibration(cfg: LabConfig) -> Path:
    """Stand in for a finished calibration run so tests skip the geometric searches."""
    report = CalibrationReport(
        semantics=ground_truth_semantics(cfg.codec(cfg.load_registry())),
        cursor_offset=DEFAULT_CURSOR_OFFSET,
        pose_rule=DEFAULT_POSE_RULE,
    )
    path = calibration_cache_path(cfg, Path(cfg.output_dir) / "calibration")
    path.parent.mkdir(parents=True, exist_ok=True)
    report.save(path)
    return path


class TestPlan:
    def test_validation(self) -> None:
        with pytest.raises(ValueError):
            ExperimentPlan("moon-landing", (0,))
        with pytest.raises(ValueError):
            ExperimentPlan("single-victim", ())
        with pytest.raises(ValueError):
            ExperimentPlan("single-victim", (1, 2, 1))

    def test_dict_roundtrip(self) -> None:
        plan = ExperimentPlan("drop-sweep", (0, 1), {"JITTER_MS": 5})
        assert ExperimentPlan.from_dict(plan.to_dict()) == plan

    def test_scenario_defaults_then_overrides(self) -> None:
        assert ExperimentPlan("multi-victim-4", (0,)).config(LabConfig()).victim_ids == (1, 2, 3, 4)
        cfg = ExperimentPlan("multi-victim-4", (0,), {"USERS": 2}).config(LabConfig())
        assert cfg.users == 2

    def test_plan_seeds(self) -> None:
        assert plan_seeds(3, 4) == (3, 4, 5, 6)

    def test_drop_sweep_rates(self) -> None:
        assert DROP_SWEEP == (0.0, 0.05, 0.10, 0.15, 0.20)


class TestCorpus:
    def test_two_victims_share_one_trace(self, small: LabConfig) -> None:
        cfg = small.with_overrides({"USERS": 2})
        corpus = simulate_corpus(cfg, seed=0)
        assert sorted(corpus.truths) == [1, 2]
        assert all(len(t.prompts) == 2 for t in corpus.truths.values())
        assert corpus.trace.config["users"] == [1, 2]

    def test_speed_cycle(self, small: LabConfig) -> None:
        cfg = small.with_overrides({"USERS": 2})
        corpus = simulate_corpus(cfg, seed=0, cycle_speed=True)
        fast, slow = (max(label.duration for label in t.labels) for t in (corpus.truths[1], corpus.truths[2]))
        assert fast <= 0.721 < slow


class TestCalibrationCache:
    def test_cached_report_is_reused(self, small: LabConfig) -> None:
        path = _cache_oracle_calibration(small)
        loaded = load_or_calibrate(small, path.parent)
        assert loaded.sha256() == CalibrationReport.load(path).sha256()

    def test_cache_key_follows_codec(self, small: LabConfig, tmp_path: Path) -> None:
        same = small.with_overrides({"SEED": 9})
        other = small.with_overrides({"ROTATION_BITS": 10})
        assert calibration_cache_path(same, tmp_path) == calibration_cache_path(small, tmp_path)
        assert calibration_cache_path(other, tmp_path) != calibration_cache_path(small, tmp_path)


class TestRunSeed:
    @pytest.mark.parametrize("scenario", ["single-victim", "drop-sweep", "row-study"])
    def test_seed_table(self, scenario: str, small: LabConfig, tmp_path: Path) -> None:
        calibration = _cache_oracle_calibration(small)
        table = run_seed((scenario, small.to_values(), 0, str(calibration), str(tmp_path / scenario)))

        assert (table["seed"] == 0).all()
        assert (tmp_path / scenario / "seed-0" / f"{scenario}.csv").exists()
        if scenario == "drop-sweep":
            assert list(table["drop_rate"]) == list(DROP_SWEEP)
        if scenario == "row-study":
            assert "grouping" not in table.columns
        assert table["top1"].between(0.0, 1.0).all()

    def test_drop_sweep_survives_a_lost_keyboard_open(
        self, small: LabConfig, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        calibration = _cache_oracle_calibration(small)
        sem = CalibrationReport.load(calibration).semantics
        registry = small.load_registry()
        repeat = RoomConfig().event_repeat

        def drop_first_prompt_opens(trace: TraceFile, extra_drop: float, seed: int) -> TraceFile:
            kept: list[TraceRecord] = []
            opens = 0
            for record in trace.records:
                try:
                    packet = parse_packet(record.raw, registry)
                except MalformedPacket:
                    kept.append(record)
                    continue
                if sem.has_keyboard_open(packet) and sem.user_id(packet) == 1:
                    opens += 1
                    if opens <= repeat:
                        continue
                kept.append(record)
            return trace.with_records(kept)

        monkeypatch.setattr("src.classes.ExperimentRunner.degrade_trace", drop_first_prompt_opens)
        table = run_seed(("drop-sweep", small.to_values(), 0, str(calibration), str(tmp_path / "lossy")))

        assert list(table["drop_rate"]) == list(DROP_SWEEP)
        assert (table["clicks"] > 0).all()
        assert (table["top1"] < 1.0).all()


class TestRunExperiment:
    def test_bundle_and_rerun(self, small: LabConfig) -> None:
        _cache_oracle_calibration(small)
        plan = ExperimentPlan("single-victim", (0, 1))

        bundle = run_experiment(plan, small, workers=1)

        merged = pd.read_csv(bundle.output_dir / "single-victim.csv")
        by_seed = pd.read_csv(bundle.output_dir / "single-victim_by_seed.csv")
        assert set(by_seed["seed"]) == {0, 1}
        assert (merged["grouping"] == "overall").sum() == 1
        assert (by_seed["grouping"] == "overall").sum() == 2
        manifest = json.loads(bundle.manifest_path.read_text())
        assert manifest["seeds"] == [0, 1]
        assert set(manifest["outputs"]) == {"single-victim.csv", "single-victim_by_seed.csv"}

        again_plan, again_cfg, _ = load_manifest(bundle.manifest_path)
        assert again_plan == plan
        assert again_cfg.config_hash() == plan.config(small).config_hash()

        _, mismatched = rerun_from_manifest(bundle.manifest_path, workers=1)
        assert mismatched == []

    def test_tampered_manifest(self, small: LabConfig, tmp_path: Path) -> None:
        path = tmp_path / "manifest.json"
        path.write_text(
            json.dumps(
                {
                    "plan": ExperimentPlan("single-victim", (0,)).to_dict(),
                    "config": small.to_values(),
                    "config_hash": "0" * 64,
                    "outputs": {},
                }
            )
        )
        with pytest.raises(ValueError):
            load_manifest(path)


class TestScenarioEffects:
    SEEDS = (0, 1)

    def _tables(self, scenario: str, cfg: LabConfig, out: Path) -> pd.DataFrame:
        calibration = _cache_oracle_calibration(cfg)
        return pd.concat(
            [run_seed((scenario, cfg.to_values(), seed, str(calibration), str(out / scenario))) for seed in self.SEEDS],
            ignore_index=True,
        )

    def test_drop_sweep_accuracy_does_not_rise(self, small: LabConfig, tmp_path: Path) -> None:
        cfg = small.with_overrides({"PROMPT_LIMIT": 10})
        by_rate = self._tables("drop-sweep", cfg, tmp_path).groupby("drop_rate")["top1"].mean()
        assert list(by_rate.index) == list(DROP_SWEEP)
        steps = by_rate.to_numpy()
        assert (steps[1:] <= steps[:-1] + 0.005).all()
        assert steps[0] >= 0.95

    def test_near_row_is_no_worse_than_far_row(self, small: LabConfig, tmp_path: Path) -> None:
        cfg = small.with_overrides({"PROMPT_LIMIT": 20})
        by_row = self._tables("row-study", cfg, tmp_path).groupby("group")["top1"].mean()
        assert set(by_row.index) == {"1", "2", "3", "4"}
        assert by_row["1"] >= by_row["4"]

    def test_four_victims_each_meet_the_bound(self, small: LabConfig, tmp_path: Path) -> None:
        cfg = small.with_overrides({"PROMPT_LIMIT": 5, "USERS": 4})
        calibration = _cache_oracle_calibration(cfg)
        table = run_seed(("multi-victim-4", cfg.to_values(), 0, str(calibration), str(tmp_path / "multi")))
        per_user = table[table["grouping"] == "user_id"]
        assert sorted(per_user["group"]) == ["1", "2", "3", "4"]
        assert (per_user["top1"] >= 0.95).all()
