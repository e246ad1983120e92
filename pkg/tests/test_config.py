from pathlib import Path

import pytest

from src.classes.LabConfig import DEFAULTS, LabConfig, resolve_path, validate_config
from src.utils.errors import ConfigError


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    # set then delete so teardown also clears anything load_dotenv wrote
    for name in ("LAB_OUTPUT_DIR", "LAB_WORKERS"):
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    # keep a developer's .env.local out of the picture
    monkeypatch.chdir(tmp_path)


class TestDefaults:
    def test_empty_values_give_defaults(self) -> None:
        cfg = LabConfig.from_values({})
        assert cfg == LabConfig()
        assert cfg.tick_rate == 15.0
        assert cfg.trigger_threshold == 0.75
        assert cfg.drop_rate == 0.0

    def test_blank_value_falls_back(self) -> None:
        assert LabConfig.from_values({"SEED": "  "}).seed == 0

    def test_every_default_key_is_a_field(self) -> None:
        assert set(LabConfig().to_values()) == set(DEFAULTS)

    def test_shipped_config_is_valid(self) -> None:
        cfg = validate_config(resolve_path("assets/lab.conf"))
        assert cfg.tick_rate <= cfg.device_rate


class TestValidation:
    def test_tick_rate_above_device_rate(self) -> None:
        with pytest.raises(ConfigError, match="TICK_RATE"):
            LabConfig.from_values({"TICK_RATE": "90", "DEVICE_RATE": "72"})

    def test_drop_rate_out_of_range(self) -> None:
        with pytest.raises(ConfigError, match="DROP_RATE"):
            LabConfig.from_values({"DROP_RATE": "1.5"})

    def test_unknown_key(self) -> None:
        with pytest.raises(ConfigError) as info:
            LabConfig.from_values({"FOO": "1"})
        assert info.value.diagnostics == ["FOO: unknown key"]

    def test_all_problems_reported_together(self) -> None:
        with pytest.raises(ConfigError) as info:
            LabConfig.from_values({"SEED": "abc", "BURST_LOSS": "maybe", "COLOR": "red"})
        keys = sorted(d.split(":")[0] for d in info.value.diagnostics)
        assert keys == ["BURST_LOSS", "COLOR", "SEED"]

    def test_start_time_normalised_to_utc(self) -> None:
        cfg = LabConfig.from_values({"START_TIME": "2024-03-01T12:00:00+02:00"})
        assert cfg.start_time == "2024-03-01T10:00:00Z"

    def test_hidden_widths(self) -> None:
        assert LabConfig.from_values({"ML_HIDDEN": "32, 16"}).ml_hidden == (32, 16)
        with pytest.raises(ConfigError, match="ML_HIDDEN"):
            LabConfig.from_values({"ML_HIDDEN": "32,0"})

    def test_missing_asset(self) -> None:
        with pytest.raises(ConfigError, match="LAYOUT"):
            LabConfig.from_values({"LAYOUT": "assets/nope.layout"})

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError):
            LabConfig.load(tmp_path / "absent.conf")


class TestLoading:
    def test_file_values(self, tmp_path: Path) -> None:
        path = tmp_path / "lab.conf"
        path.write_text("TICK_RATE=10\nUSERS=3\n# comment\nBURST_LOSS=yes\n")
        cfg = LabConfig.load(path)
        assert (cfg.tick_rate, cfg.users, cfg.burst_loss) == (10.0, 3, True)
        assert cfg.seed == 0

    def test_text_roundtrip(self, tmp_path: Path) -> None:
        cfg = LabConfig().with_overrides({"DROP_RATE": 0.1, "ML_HIDDEN": (64,), "QUANTIZATION": False})
        path = tmp_path / "lab.conf"
        path.write_text(cfg.to_text())
        assert LabConfig.load(path) == cfg

    def test_environment_overrides(self, monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
        monkeypatch.setenv("LAB_OUTPUT_DIR", str(tmp_path / "runs"))
        monkeypatch.setenv("LAB_WORKERS", "4")
        cfg = LabConfig().with_environment()
        assert cfg.output_dir == str(tmp_path / "runs")
        assert cfg.workers == 4

    def test_env_local_file(self, tmp_path: Path) -> None:
        (tmp_path / ".env.local").write_text("LAB_WORKERS=3\n")
        assert LabConfig().with_environment().workers == 3

    @pytest.mark.parametrize("value", ["0", "many"])
    def test_bad_worker_count(self, value: str, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("LAB_WORKERS", value)
        with pytest.raises(ConfigError, match="LAB_WORKERS"):
            LabConfig().with_environment()


class TestDerived:
    def test_overrides_revalidate(self) -> None:
        assert LabConfig().with_overrides({"tick_rate": 10}).tick_rate == 10.0
        with pytest.raises(ConfigError):
            LabConfig().with_overrides({"DROP_RATE": 2})

    def test_config_hash_ignores_runtime_keys(self) -> None:
        base = LabConfig()
        assert base.with_overrides({"OUTPUT_DIR": "elsewhere", "WORKERS": 8}).config_hash() == base.config_hash()
        assert base.with_overrides({"SEED": 1}).config_hash() != base.config_hash()

    def test_calibration_hash_ignores_victim_settings(self) -> None:
        base = LabConfig()
        assert base.with_overrides({"SEED": 4, "USERS": 3}).calibration_hash() == base.calibration_hash()
        assert base.with_overrides({"ROTATION_BITS": 10}).calibration_hash() != base.calibration_hash()

    def test_victims_skip_observer(self) -> None:
        cfg = LabConfig().with_overrides({"USERS": 3, "OBSERVER_ID": 2})
        assert cfg.victim_ids == (1, 3, 4)
        room = cfg.room_config(seed=9)
        assert room.users == (1, 3, 4)
        assert room.seed == 9

    def test_profile_and_training(self) -> None:
        cfg = LabConfig().with_overrides({"AIM_SIGMA_MM": 2, "ML_EPOCHS": 10, "ML_HIDDEN": "32"})
        assert cfg.profile().aim_sigma == pytest.approx(0.002)
        assert cfg.profile(speed_quintile=3).speed_quintile == 3
        training = cfg.training_config(seed=5)
        assert (training.epochs, training.hidden, training.seed) == (10, (32,), 5)

    def test_codec_follows_widths(self) -> None:
        cfg = LabConfig().with_overrides({"POSITION_BITS": 12, "ROTATION_BITS": 7})
        codec = cfg.codec(cfg.load_registry())
        assert codec.spec.total_bits == 3 * 12 + 2 + 3 * 7
        assert cfg.keyboard().labels[0] == "1"
        assert cfg.cursor_offset().direction_error(LabConfig().cursor_offset()) < 1e-9
