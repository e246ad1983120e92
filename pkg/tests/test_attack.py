import logging
from pathlib import Path
from typing import Callable

import pytest

from src.classes.CalibrationReport import CalibrationReport
from src.classes.CursorOffset import CursorOffset
from src.classes.CustomTypeRegistry import CustomTypeRegistry
from src.classes.FieldSemanticsMap import FieldLocation, FieldSemanticsMap
from src.classes.KeyboardModel import DEFAULT_POSE_RULE, KeyboardModel
from src.classes.KeystrokeAttack import (
    ClickRecord,
    KeystrokeReport,
    demux_users,
    detect_clicks,
    filter_motion_source,
    infer_keystrokes,
    parse_stream,
    run_attack,
    trigger_crossings,
)
from src.classes.MotionScript import MotionScript
from src.classes.MotionUpdate import EVENT_KEYBOARD_OPEN, FIELD_TICK, Hand, ground_truth_semantics, quantize_trigger
from src.classes.Packet import Packet, parse_packet
from src.classes.RoomSimulator import DEFAULT_BACKGROUND, RoomConfig, run_session
from src.classes.TraceFile import TraceFile, TraceRecord
from src.classes.Transform import Transform, UnitQuat, Vec3
from src.classes.TransformCodec import QuantizedTransformCodec
from src.classes.TypingSynthesizer import DEFAULT_CURSOR_OFFSET, TypistProfile, synthesize_session
from src.utils.errors import EmptyTrace, MissingUserId, NoKeyboardPose
from src.utils.eval_utils import evaluate
from src.utils.prompt_utils import Prompt, generate_prompt_battery

MotionPacketFactory = Callable[..., Packet]

HEAD = Transform(Vec3(0.0, 1.6, 0.0), UnitQuat.identity())


def _oracle_calibration(codec: QuantizedTransformCodec) -> CalibrationReport:
    return CalibrationReport(
        semantics=ground_truth_semantics(codec),
        cursor_offset=DEFAULT_CURSOR_OFFSET,
        pose_rule=DEFAULT_POSE_RULE,
    )


def _drop_keyboard_opens(
    trace: TraceFile, registry: CustomTypeRegistry, sem: FieldSemanticsMap, drop: range
) -> TraceFile:
    """Remove the keyboard-open records whose order among all keyboard-open records falls in `drop`."""
    kept: list[TraceRecord] = []
    seen = 0
    for record in trace.records:
        if sem.has_keyboard_open(parse_packet(record.raw, registry)):
            seen += 1
            if seen - 1 in drop:
                continue
        kept.append(record)
    return trace.with_records(kept)


class TestTriggerCrossings:
    @pytest.mark.parametrize(
        ("values", "expected"),
        [
            ([0.0, 0.3, 0.8, 0.9, 0.2], [2]),
            ([0.8, 0.9, 0.2], []),
            ([0.8, 0.9, 0.2, 0.8], [3]),
            ([0.0, 0.8, 0.72, 0.8, 0.0, 0.76], [1, 5]),
            ([0.0, 0.74, 0.6], []),
        ],
    )
    def test_right_hand(
        self, values: list[float], expected: list[int], motion_packet: MotionPacketFactory, sem: FieldSemanticsMap
    ) -> None:
        stream = [motion_packet(i, right_trigger=v) for i, v in enumerate(values)]
        crossings = trigger_crossings(stream, sem)
        assert [i for i, _ in crossings] == expected
        assert all(hands == [Hand.RIGHT] for _, hands in crossings)

    def test_both_hands_same_tick(self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap) -> None:
        stream = [motion_packet(0), motion_packet(1, left_trigger=1.0, right_trigger=1.0)]
        assert trigger_crossings(stream, sem) == [(1, [Hand.LEFT, Hand.RIGHT])]

    def test_custom_threshold(self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap) -> None:
        stream = [motion_packet(i, right_trigger=v) for i, v in enumerate([0.0, 0.5, 0.0])]
        assert trigger_crossings(stream, sem, threshold=0.4) == [(1, [Hand.RIGHT])]

    def test_press_at_threshold_survives_quantization(
        self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap
    ) -> None:
        assert quantize_trigger(0.75) / 255 < 0.75
        stream = [motion_packet(i, right_trigger=v) for i, v in enumerate([0.0, 0.75, 0.0, 0.745])]
        assert trigger_crossings(stream, sem) == [(1, [Hand.RIGHT])]


class TestDetectClicks:
    def test_click_carries_keyboard_head(self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap) -> None:
        stream = [
            motion_packet(0, event=EVENT_KEYBOARD_OPEN),
            motion_packet(1),
            motion_packet(2, right_trigger=1.0),
        ]
        clicks = detect_clicks(stream, sem, tick_rate=15.0)
        assert len(clicks) == 1
        click = clicks[0]
        assert (click.user_id, click.hand, click.tick) == (1, Hand.RIGHT, 2)
        assert click.time == pytest.approx(2 / 15)
        assert click.keyboard_head is not None

    def test_click_before_open_has_no_pose(
        self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap, codec: QuantizedTransformCodec, keyboard: KeyboardModel
    ) -> None:
        clicks = detect_clicks([motion_packet(0), motion_packet(1, right_trigger=1.0)], sem)
        assert clicks[0].keyboard_head is None
        with pytest.raises(NoKeyboardPose):
            infer_keystrokes(clicks, _oracle_calibration(codec), keyboard)

    def test_head_moved_since_open_warns(
        self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap, caplog: pytest.LogCaptureFixture
    ) -> None:
        moved = Transform(HEAD.position + Vec3(0.05, 0.0, 0.0), HEAD.rotation)
        stream = [
            motion_packet(0, event=EVENT_KEYBOARD_OPEN),
            motion_packet(1, right_trigger=1.0),
            motion_packet(2),
            motion_packet(3, right_trigger=1.0, head=moved),
        ]
        with caplog.at_level(logging.WARNING):
            clicks = detect_clicks(stream, sem)
        assert [c.tick for c in clicks] == [1, 3]
        first, second = (c.keyboard_head for c in clicks)
        assert first is not None and second is not None and second.is_close(first)
        assert "1 clicks came after the head moved" in caplog.text

    def test_still_head_does_not_warn(
        self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap, caplog: pytest.LogCaptureFixture
    ) -> None:
        stream = [motion_packet(0, event=EVENT_KEYBOARD_OPEN), motion_packet(1, right_trigger=1.0)]
        with caplog.at_level(logging.WARNING):
            detect_clicks(stream, sem)
        assert "head moved" not in caplog.text


class TestInferKeystrokes:
    def test_ray_away_from_keyboard_is_unranked(
        self, codec: QuantizedTransformCodec, keyboard: KeyboardModel, caplog: pytest.LogCaptureFixture
    ) -> None:
        placed = keyboard.with_pose_rule(DEFAULT_POSE_RULE).place(HEAD)
        origin = placed.plane_point + placed.plane_normal * 0.1
        forward = Transform.identity().forward()
        away = UnitQuat.from_two_vectors(forward, placed.plane_normal)
        toward = UnitQuat.from_two_vectors(forward, -placed.plane_normal)
        calib = CalibrationReport(
            semantics=ground_truth_semantics(codec), cursor_offset=CursorOffset.identity(), pose_rule=DEFAULT_POSE_RULE
        )
        clicks = [
            ClickRecord(1, Hand.RIGHT, tick, tick, tick / 15, Transform(origin, rotation), 1.0, keyboard_head=HEAD)
            for tick, rotation in enumerate([away, toward])
        ]

        with caplog.at_level(logging.WARNING):
            ranked = infer_keystrokes(clicks, calib, keyboard)

        assert ranked[0].ranking == ()
        assert ranked[0].predicted == ""
        assert len(ranked[1].ranking) == len(keyboard.keys)
        assert "aims off the keyboard plane" in caplog.text

    def test_clicks_before_first_open_stay_unranked(
        self, codec: QuantizedTransformCodec, keyboard: KeyboardModel, caplog: pytest.LogCaptureFixture
    ) -> None:
        placed = keyboard.with_pose_rule(DEFAULT_POSE_RULE).place(HEAD)
        rotation = UnitQuat.from_two_vectors(Transform.identity().forward(), -placed.plane_normal)
        hand = Transform(placed.plane_point + placed.plane_normal * 0.1, rotation)
        calib = CalibrationReport(
            semantics=ground_truth_semantics(codec), cursor_offset=CursorOffset.identity(), pose_rule=DEFAULT_POSE_RULE
        )
        clicks = [
            ClickRecord(1, Hand.RIGHT, 0, 0, 0.0, hand, 1.0),
            ClickRecord(1, Hand.RIGHT, 1, 1, 1 / 15, hand, 1.0, keyboard_head=HEAD),
        ]
        with caplog.at_level(logging.WARNING):
            ranked = infer_keystrokes(clicks, calib, keyboard)
        assert ranked[0].ranking == ()
        assert len(ranked[1].ranking) == len(keyboard.keys)
        assert "1 clicks before the first keyboard-open left unranked" in caplog.text


class TestStreamHandling:
    def test_demux_groups_by_user(self, motion_packet: MotionPacketFactory, sem: FieldSemanticsMap) -> None:
        packets = [motion_packet(0, user_id=4), motion_packet(0, user_id=2), motion_packet(1, user_id=4)]
        streams = demux_users(packets, sem)
        assert list(streams) == [2, 4]
        assert [sem.tick(p) for p in streams[4]] == [0, 1]

    def test_demux_without_semantics_uses_kind(self, motion_packet: MotionPacketFactory) -> None:
        assert list(demux_users([motion_packet(0, user_id=9)])) == [9]

    def test_missing_user_id(self, motion_packet: MotionPacketFactory) -> None:
        packet = motion_packet(0)
        no_user = FieldSemanticsMap({"user_id": FieldLocation(0x7E), "tick": FieldLocation(FIELD_TICK)})
        with pytest.raises(MissingUserId):
            demux_users([packet], no_user)

    def test_filter_keeps_busiest_source(self) -> None:
        records = [TraceRecord(i, 5 if i % 3 else 2, b"x") for i in range(9)]
        kept = filter_motion_source(TraceFile(records=records))
        assert {r.source_id for r in kept.records} == {5}
        assert len(kept) == 6

    def test_filter_tie_goes_to_lowest_id(self) -> None:
        records = [TraceRecord(0, 7, b"a"), TraceRecord(1, 3, b"b")]
        assert [r.source_id for r in filter_motion_source(TraceFile(records=records)).records] == [3]

    def test_filter_empty_trace(self) -> None:
        with pytest.raises(EmptyTrace):
            filter_motion_source(TraceFile())

    def test_parse_stream_skips_malformed(self, motion_packet: MotionPacketFactory, registry: CustomTypeRegistry) -> None:
        good = motion_packet(0).to_bytes()
        trace = TraceFile(records=[TraceRecord(0, 1, good), TraceRecord(1, 1, b"\x00\x01"), TraceRecord(2, 1, good)])
        assert len(parse_stream(trace, registry)) == 2


class TestEndToEnd:
    def test_oracle_calibration_recovers_every_key(
        self, registry: CustomTypeRegistry, float_codec: QuantizedTransformCodec, keyboard: KeyboardModel
    ) -> None:
        prompts = [Prompt("numbers", "123"), Prompt("sentence", "hello world")]
        script = synthesize_session(prompts, keyboard, TypistProfile(), seed=5)
        trace = run_session(RoomConfig(), [script], DEFAULT_BACKGROUND, registry, float_codec)

        report = run_attack(trace, _oracle_calibration(float_codec), keyboard, registry)

        assert report.text(1) == "123hello world"
        result = evaluate(report, {1: script.truth()})
        assert result.accuracy(1) == 1.0
        assert result.summary["undetected"] == 0

    def test_default_quantization_battery(
        self, registry: CustomTypeRegistry, codec: QuantizedTransformCodec, keyboard: KeyboardModel
    ) -> None:
        script = synthesize_session(generate_prompt_battery(0), keyboard, TypistProfile(), seed=0)
        trace = run_session(RoomConfig(), [script], DEFAULT_BACKGROUND, registry, codec)

        result = evaluate(run_attack(trace, _oracle_calibration(codec), keyboard, registry), {1: script.truth()})

        assert result.summary["clicks"] > 500
        assert result.accuracy(1) >= 0.95
        assert result.accuracy(5) >= result.accuracy(1)

    def test_report_roundtrip(
        self, registry: CustomTypeRegistry, codec: QuantizedTransformCodec, keyboard: KeyboardModel, tmp_path: Path
    ) -> None:
        script = synthesize_session([Prompt("numbers", "42")], keyboard, TypistProfile(), seed=1)
        trace = run_session(RoomConfig(), [script], (), registry, codec)
        report = run_attack(trace, _oracle_calibration(codec), keyboard, registry)
        path = tmp_path / "keystrokes.json"
        report.save(path)
        loaded = KeystrokeReport.load(path)
        assert loaded.text(1) == report.text(1)
        assert loaded.click_count() == report.click_count() == 2
        assert loaded.metadata["trace_sha256"] == trace.sha256()
        assert [c.top(3) for c in loaded.users[1]] == [c.top(3) for c in report.users[1]]


class TestLostKeyboardOpen:
    @pytest.fixture(scope="class")
    def session(
        self, registry: CustomTypeRegistry, float_codec: QuantizedTransformCodec, keyboard: KeyboardModel
    ) -> tuple[TraceFile, MotionScript]:
        prompts = [Prompt("numbers", "123"), Prompt("sentence", "hello world")]
        script = synthesize_session(prompts, keyboard, TypistProfile(), seed=5)
        return run_session(RoomConfig(), [script], (), registry, float_codec), script

    def test_lost_first_open_leaves_its_prompt_unranked(
        self,
        session: tuple[TraceFile, MotionScript],
        registry: CustomTypeRegistry,
        float_codec: QuantizedTransformCodec,
        keyboard: KeyboardModel,
        caplog: pytest.LogCaptureFixture,
    ) -> None:
        trace, script = session
        sem = ground_truth_semantics(float_codec)
        lossy = _drop_keyboard_opens(trace, registry, sem, range(RoomConfig().event_repeat))

        with caplog.at_level(logging.WARNING):
            report = run_attack(lossy, _oracle_calibration(float_codec), keyboard, registry)

        assert [c.predicted for c in report.users[1][:3]] == ["", "", ""]
        assert report.text(1) == "hello world"
        assert "3 clicks before the first keyboard-open left unranked" in caplog.text
        result = evaluate(report, {1: script.truth()})
        assert result.summary["undetected"] == 0
        assert result.accuracy(5) == pytest.approx(11 / 14)

    def test_stream_without_any_open_is_still_reported(
        self,
        session: tuple[TraceFile, MotionScript],
        registry: CustomTypeRegistry,
        float_codec: QuantizedTransformCodec,
        keyboard: KeyboardModel,
        caplog: pytest.LogCaptureFixture,
    ) -> None:
        trace, script = session
        lossy = _drop_keyboard_opens(trace, registry, ground_truth_semantics(float_codec), range(len(trace)))

        with caplog.at_level(logging.WARNING):
            report = run_attack(lossy, _oracle_calibration(float_codec), keyboard, registry)

        assert report.click_count() == 14
        assert report.text(1) == ""
        assert all(not c.ranking for c in report.users[1])
        assert "without any keyboard-open event; clicks left unranked" in caplog.text
        assert evaluate(report, {1: script.truth()}).accuracy(5) == 0.0

    def test_lost_reopen_keeps_the_previous_pose(
        self,
        session: tuple[TraceFile, MotionScript],
        registry: CustomTypeRegistry,
        float_codec: QuantizedTransformCodec,
        keyboard: KeyboardModel,
    ) -> None:
        trace, _ = session
        repeat = RoomConfig().event_repeat
        lossy = _drop_keyboard_opens(trace, registry, ground_truth_semantics(float_codec), range(repeat, 2 * repeat))

        report = run_attack(lossy, _oracle_calibration(float_codec), keyboard, registry)

        clicks = report.users[1]
        first = clicks[0].keyboard_head
        assert first is not None
        assert all(c.keyboard_head is not None and c.keyboard_head.is_close(first) for c in clicks)
        assert report.text(1).startswith("123")
