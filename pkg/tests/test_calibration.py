import math
from dataclasses import replace
from pathlib import Path

import pytest

from src.classes.CalibrationReport import CalibrationReport
from src.classes.Calibrator import (
    CALIBRATION_HEADS,
    fit_keyboard_pose_rule,
    head_pose,
    holdout_error,
    measure_cursor_offset,
    measure_key_corners,
    run_calibration,
)
from src.classes.CursorOffset import CursorOffset
from src.classes.CustomTypeRegistry import CustomTypeRegistry
from src.classes.FieldCorrelator import FieldCorrelator, channel_for_dimension, correlate_fields
from src.classes.FieldSemanticsMap import KEYBOARD_OPEN, TICK, USER_ID
from src.classes.KeyboardModel import DEFAULT_POSE_RULE, KEY_COUNT, KeyboardModel
from src.classes.KeystrokeAttack import run_attack
from src.classes.LabConfig import LabConfig
from src.classes.MotionScript import MotionSample, MotionScript, Segment
from src.classes.MotionUpdate import EVENT_KEYBOARD_OPEN, ground_truth_semantics
from src.classes.Quad import Quad
from src.classes.ReticleOracle import KeyboardView, ReticleOracle
from src.classes.RoomSimulator import DEFAULT_BACKGROUND, RoomConfig, run_session
from src.classes.ScriptedReplay import DEFAULT_BASE, default_isolation_sweeps, scripted_replay
from src.classes.Transform import Transform, Vec3
from src.classes.TransformCodec import QuantizedTransformCodec
from src.classes.TypingSynthesizer import DEFAULT_CURSOR_OFFSET, synthesize_session
from src.utils.errors import AmbiguousField, DegeneratePoses
from src.utils.prompt_utils import generate_prompt_battery

# semantic values checked per channel family, spanning the swept ranges
CHECK_VALUES = {"pos": (-1.0, 0.0, 1.0, 2.0), "rot": (-0.5, 0.0, 0.5), "trigger": (0.0, 0.5, 1.0)}
TOLERANCE = {"pos": 1e-3, "rot": 1e-2, "trigger": 1e-3}


def _family(channel: str) -> str:
    if channel.endswith(".trigger"):
        return "trigger"
    return "pos" if ".pos." in channel else "rot"


class TestFieldCorrelator:
    @pytest.fixture(scope="class")
    def recovered(self, registry: CustomTypeRegistry, codec: QuantizedTransformCodec) -> FieldCorrelator:
        script = scripted_replay(default_isolation_sweeps(steps=50))
        trace = run_session(RoomConfig(), [script], (), registry, codec)
        correlator = FieldCorrelator(registry)
        correlator.add(script, trace)
        return correlator

    def test_locations_match_encoder(self, recovered: FieldCorrelator, codec: QuantizedTransformCodec) -> None:
        truth = ground_truth_semantics(codec)
        found = recovered.semantics()
        assert set(found.channels) == set(truth.channels)
        for name, expected in truth.channels.items():
            got = found.location(name)
            assert (got.field_id, got.sub_index) == (expected.field_id, expected.sub_index), name
        assert found.location(KEYBOARD_OPEN).event_code == EVENT_KEYBOARD_OPEN

    def test_conversions_match_encoder(self, recovered: FieldCorrelator, codec: QuantizedTransformCodec) -> None:
        truth = ground_truth_semantics(codec)
        found = recovered.semantics()
        for name, expected in truth.channels.items():
            if name in (KEYBOARD_OPEN, USER_ID, TICK) or name.endswith(".rot.index"):
                continue
            family = _family(name)
            got = found.location(name).conversion
            for value in CHECK_VALUES[family]:
                raw = expected.conversion.invert(value)
                assert got.apply(raw) == pytest.approx(value, abs=TOLERANCE[family]), name

    def test_trigger_scale_is_one_over_255(self, recovered: FieldCorrelator) -> None:
        conversion = recovered.semantics().location("right.trigger").conversion
        assert conversion.scale == pytest.approx(1.0 / 255.0, rel=1e-6)
        assert conversion.bias == pytest.approx(0.0, abs=1e-6)

    def test_fit_residuals_recorded(self, recovered: FieldCorrelator) -> None:
        recovered.semantics()
        assert recovered.fit_residuals["left.trigger"] < 1e-9
        assert all(r < 0.01 for r in recovered.fit_residuals.values())

    def test_quaternion_inputs_land_in_slots(self) -> None:
        assert channel_for_dimension("head.quat.x") == "head.rot.a"
        assert channel_for_dimension("right.quat.z") == "right.rot.c"
        assert channel_for_dimension("left.pos.y") == "left.pos.y"

    def test_coupled_inputs_are_ambiguous(self, registry: CustomTypeRegistry, codec: QuantizedTransformCodec) -> None:
        samples: list[MotionSample] = [DEFAULT_BASE] * 72
        values: list[float] = []
        for step in range(20):
            v = -0.1 + 0.01 * step
            left = Transform(DEFAULT_BASE.left.position + Vec3(v, v, 0.0), DEFAULT_BASE.left.rotation)
            samples += [replace(DEFAULT_BASE, left=left)] * 5
            values += [v] * 5
        script = MotionScript(
            user_id=1,
            device_rate=72.0,
            samples=samples,
            segments=[Segment(None, 0, 72, (0.0,) * 72), Segment("left.pos.x", 72, len(samples), tuple(values))],
        )
        correlator = FieldCorrelator(registry)
        correlator.add(script, run_session(RoomConfig(), [script], (), registry, codec))
        with pytest.raises(AmbiguousField):
            correlator.semantics()

    def test_correlate_fields_over_split_sweeps(self, registry: CustomTypeRegistry, codec: QuantizedTransformCodec) -> None:
        sweeps = default_isolation_sweeps(steps=50)
        half = len(sweeps) // 2
        scripts = [scripted_replay(sweeps[:half]), scripted_replay(sweeps[half:])]
        traces = [run_session(RoomConfig(), [s], (), registry, codec) for s in scripts]

        found = correlate_fields(scripts, traces, registry)

        truth = ground_truth_semantics(codec)
        for name in ("head.pos.x", "right.rot.b", "left.trigger"):
            got, expected = found.location(name), truth.location(name)
            assert (got.field_id, got.sub_index) == (expected.field_id, expected.sub_index), name
        with pytest.raises(ValueError):
            correlate_fields(scripts, traces[:1], registry)

    def test_script_without_segments_rejected(self, registry: CustomTypeRegistry, codec: QuantizedTransformCodec) -> None:
        script = MotionScript(user_id=1, device_rate=72.0, samples=[DEFAULT_BASE] * 72)
        trace = run_session(RoomConfig(), [script], (), registry, codec)
        with pytest.raises(ValueError):
            FieldCorrelator(registry).add(script, trace)


class TestCursorOffset:
    def test_recovers_default_offset(self) -> None:
        oracle = ReticleOracle(DEFAULT_CURSOR_OFFSET)
        search: dict[str, object] = {}
        measured = measure_cursor_offset(oracle, record=search)
        truth = DEFAULT_CURSOR_OFFSET.canonical()
        assert measured.direction_error(truth) < math.radians(0.1)
        assert measured.position_error(truth) < 1e-3
        assert search["oracle_queries"] == oracle.queries

    def test_identity_offset(self) -> None:
        measured = measure_cursor_offset(ReticleOracle(CursorOffset.identity()))
        assert measured.direction_error(CursorOffset.identity()) < math.radians(0.1)
        assert measured.transform.position.norm() < 1e-3

    def test_controller_frame_is_handled(self) -> None:
        grip = Transform(Vec3(0.0, -0.02, 0.03), DEFAULT_CURSOR_OFFSET.transform.rotation.conjugate())
        truth = CursorOffset.from_yaw(-5.0, 0.01, 0.0, 0.05)
        measured = measure_cursor_offset(ReticleOracle(truth, grip), grip)
        assert measured.direction_error(truth) < math.radians(0.1)
        assert measured.position_error(truth) < 1e-3


class TestKeyCorners:
    def test_corners_match_layout(self, keyboard: KeyboardModel) -> None:
        head = head_pose(*CALIBRATION_HEADS[1])
        placed = keyboard.place(head)
        view = KeyboardView(DEFAULT_CURSOR_OFFSET, placed)
        quads = measure_key_corners(view, DEFAULT_CURSOR_OFFSET.canonical(), head, labels=["q", "5", "space"])
        assert set(quads) == {"q", "5", "space"}
        for label, quad in quads.items():
            assert quad.max_corner_error(placed.quads[label]) < 1e-3, label
        assert view.queries > 0


class TestPoseRule:
    def test_exact_quads_give_exact_rule(self, keyboard: KeyboardModel) -> None:
        heads = [head_pose(*spec) for spec in CALIBRATION_HEADS]
        measurements = [(h, keyboard.place(h).quads) for h in heads[:3]]
        fit = fit_keyboard_pose_rule(measurements, keyboard)
        assert fit.transform.is_close(DEFAULT_POSE_RULE, 1e-6)
        assert fit.rms_residual < 1e-9
        held = heads[3]
        assert holdout_error(fit.transform, keyboard, held, keyboard.place(held).quads) < 1e-6

    def test_two_poses_are_degenerate(self, keyboard: KeyboardModel) -> None:
        heads = [head_pose(*spec) for spec in CALIBRATION_HEADS[:2]]
        with pytest.raises(DegeneratePoses):
            fit_keyboard_pose_rule([(h, keyboard.place(h).quads) for h in heads], keyboard)

    def test_repeated_pose_is_degenerate(self, keyboard: KeyboardModel) -> None:
        head = head_pose(*CALIBRATION_HEADS[0])
        with pytest.raises(DegeneratePoses):
            fit_keyboard_pose_rule([(head, keyboard.place(head).quads)] * 3, keyboard)

    def test_same_heading_on_a_line_is_degenerate(self, keyboard: KeyboardModel) -> None:
        heads = [head_pose(x, 1.6, 0.0, 0.0, -20.0) for x in (0.0, 0.5, 1.0)]
        with pytest.raises(DegeneratePoses):
            fit_keyboard_pose_rule([(h, keyboard.place(h).quads) for h in heads], keyboard)


class TestCalibrationReport:
    def test_save_load(self, codec: QuantizedTransformCodec, tmp_path: Path) -> None:
        report = CalibrationReport(
            semantics=ground_truth_semantics(codec),
            cursor_offset=DEFAULT_CURSOR_OFFSET,
            pose_rule=DEFAULT_POSE_RULE,
            residuals={"pose_rule_rms": 1e-4},
        )
        path = tmp_path / "calibration.json"
        report.save(path)
        loaded = CalibrationReport.load(path)
        assert loaded.semantics == report.semantics
        assert loaded.pose_rule.is_close(report.pose_rule, 1e-6)
        assert loaded.cursor_offset.direction_error(report.cursor_offset) < 1e-6
        assert loaded.residuals == report.residuals


class TestRunCalibration:
    @pytest.fixture(scope="class")
    def calibrated(self) -> CalibrationReport:
        return run_calibration(LabConfig())

    def test_recovers_injected_setup(self, calibrated: CalibrationReport, codec: QuantizedTransformCodec, keyboard: KeyboardModel) -> None:
        truth = ground_truth_semantics(codec)
        for name, expected in truth.channels.items():
            got = calibrated.semantics.location(name)
            assert (got.field_id, got.sub_index) == (expected.field_id, expected.sub_index), name

        offset = LabConfig().cursor_offset().canonical()
        assert calibrated.cursor_offset.direction_error(offset) < math.radians(0.1)
        assert calibrated.cursor_offset.position_error(offset) < 1e-3

        placed = keyboard.place(head_pose(*CALIBRATION_HEADS[0]))
        assert len(calibrated.key_corners) == KEY_COUNT
        for label, corners in calibrated.key_corners.items():
            measured = Quad(tuple(Vec3(*c) for c in corners))  # type: ignore[arg-type]
            assert measured.max_corner_error(placed.quads[label]) < 1e-3, label
        assert calibrated.residuals["pose_rule_holdout"] < 1e-3

    def test_attack_matches_oracle_calibration(
        self, calibrated: CalibrationReport, registry: CustomTypeRegistry, keyboard: KeyboardModel
    ) -> None:
        cfg = LabConfig()
        codec = cfg.codec(registry)
        script = synthesize_session(generate_prompt_battery(3)[:8], keyboard, cfg.profile(), seed=3, offset=cfg.cursor_offset())
        trace = run_session(RoomConfig(), [script], DEFAULT_BACKGROUND, registry, codec)
        oracle = CalibrationReport(
            semantics=ground_truth_semantics(codec), cursor_offset=cfg.cursor_offset(), pose_rule=DEFAULT_POSE_RULE
        )

        by_oracle = run_attack(trace, oracle, keyboard, registry).users[1]
        by_calibration = run_attack(trace, calibrated, keyboard, registry).users[1]

        assert len(by_calibration) == len(by_oracle) == len(script.labels)
        agree = sum(a.predicted == b.predicted for a, b in zip(by_oracle, by_calibration))
        assert agree >= 0.95 * len(by_oracle)
