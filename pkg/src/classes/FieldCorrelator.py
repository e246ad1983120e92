"""Recover field semantics from isolation sweeps: a field tracks an input iff it changes only when that input does."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..utils.errors import AmbiguousField, NoCandidate
from ..utils.logger import setup_logger
from .CustomTypeRegistry import CustomTypeRegistry
from .FieldSemanticsMap import (
    KEYBOARD_OPEN,
    TICK,
    USER_ID,
    Conversion,
    FieldLocation,
    FieldSemanticsMap,
    rotation_channel,
    rotation_index_channel,
)
from .KeystrokeAttack import filter_motion_source, parse_stream
from .MotionScript import MotionScript
from .Packet import FieldKind, Packet
from .RoomSimulator import sample_index_for_tick
from .ScriptedReplay import QUAT_AXES
from .TraceFile import TraceFile

logger = setup_logger(__name__)

SLOT_FOR_AXIS = dict(zip(QUAT_AXES, ("a", "b", "c")))
_NON_MOTION_KINDS = {FieldKind.USER_ID, FieldKind.TICK_STAMP, FieldKind.EVENT_CODE}

CandidateKey = tuple[int, Optional[int]]


def channel_for_dimension(dimension: str) -> str:
    """Semantic channel an input dimension lands in; quaternion vector components map to smallest-three slots."""
    part, _, rest = dimension.partition(".")
    kind, _, axis = rest.partition(".")
    if kind == "quat":
        return rotation_channel(part, SLOT_FOR_AXIS[axis])
    return dimension


@dataclass(frozen=True)
class Observation:
    segment: int
    dimension: Optional[str]
    input_value: float
    packet: Packet


def _find_kind(packet: Packet, kind: FieldKind) -> Optional[tuple[int, int]]:
    for f in packet.fields:
        if f.value.kind == kind:
            return f.field_id, int(f.value.value)  # type: ignore[arg-type]
    return None


def _candidates(packet: Packet) -> dict[CandidateKey, float]:
    """Every numeric scalar in a packet, keyed by (field id, sub-field index)."""
    values: dict[CandidateKey, float] = {}
    for f in packet.fields:
        v = f.value
        if v.kind in _NON_MOTION_KINDS:
            continue
        if v.kind == FieldKind.BYTE_STRING:
            if v.sub_fields is not None:
                for i, sub in enumerate(v.sub_fields):
                    values[(f.field_id, i)] = float(sub)
        else:
            values[(f.field_id, None)] = float(v.value)  # type: ignore[arg-type]
    return values


def _observations(script: MotionScript, trace: TraceFile, registry: CustomTypeRegistry, offset: int) -> list[Observation]:
    tick_rate = float(trace.config.get("tick_rate", 15.0))
    device_rate = float(trace.config.get("device_rate", script.device_rate))
    segment_of = np.full(len(script), -1, dtype=np.int64)
    for s, seg in enumerate(script.segments):
        segment_of[seg.start_index : seg.end_index] = s

    observations: list[Observation] = []
    for packet in parse_stream(filter_motion_source(trace), registry):
        uid = _find_kind(packet, FieldKind.USER_ID)
        tick = _find_kind(packet, FieldKind.TICK_STAMP)
        if uid is None or tick is None or uid[1] != script.user_id:
            continue
        index = min(sample_index_for_tick(tick[1], device_rate, tick_rate), len(script) - 1)
        s = int(segment_of[index])
        if s < 0:
            continue
        # a stale update on the first tick of a segment still carries the previous segment's input
        if tick[1] > 0 and int(segment_of[sample_index_for_tick(tick[1] - 1, device_rate, tick_rate)]) != s:
            continue
        seg = script.segments[s]
        observations.append(Observation(offset + s, seg.dimension, seg.values[index - seg.start_index], packet))
    return observations


class FieldCorrelator:
    def __init__(self, registry: CustomTypeRegistry) -> None:
        self.registry = registry
        self.observations: list[Observation] = []
        self.fit_residuals: dict[str, float] = {}
        self._segments = 0

    def add(self, script: MotionScript, trace: TraceFile) -> None:
        if not script.segments:
            raise ValueError(f"Script for user {script.user_id} has no sweep segments")
        self.observations += _observations(script, trace, self.registry, self._segments)
        self._segments += len(script.segments)

    def _values_by_segment(self) -> dict[CandidateKey, dict[int, set[float]]]:
        table: dict[CandidateKey, dict[int, set[float]]] = defaultdict(lambda: defaultdict(set))
        for obs in self.observations:
            for key, value in _candidates(obs.packet).items():
                table[key][obs.segment].add(value)
        return table

    def _locate(self, dimension: str, table: dict[CandidateKey, dict[int, set[float]]]) -> CandidateKey:
        own = {o.segment for o in self.observations if o.dimension == dimension}
        found: list[CandidateKey] = []
        for key, by_segment in table.items():
            varies = any(len(by_segment.get(s, ())) > 1 for s in own)
            steady = all(len(values) <= 1 for s, values in by_segment.items() if s not in own)
            if varies and steady:
                found.append(key)
        if not found:
            raise NoCandidate(f"No field tracks input {dimension!r}")
        if len(found) > 1:
            raise AmbiguousField(f"Input {dimension!r} is tracked by several fields: {sorted(found, key=str)}")
        return found[0]

    def _fit(self, dimension: str, key: CandidateKey) -> Conversion:
        raw: list[float] = []
        semantic: list[float] = []
        for obs in self.observations:
            if obs.dimension != dimension:
                continue
            value = _candidates(obs.packet).get(key)
            if value is not None:
                raw.append(value)
                semantic.append(obs.input_value)
        design = np.column_stack([np.asarray(raw), np.ones(len(raw))])
        (scale, bias), *_ = np.linalg.lstsq(design, np.asarray(semantic), rcond=None)
        residual = np.asarray(semantic) - design @ np.array([scale, bias])
        self.fit_residuals[channel_for_dimension(dimension)] = float(np.max(np.abs(residual)))
        return Conversion(float(scale), float(bias))

    def _locate_event(self) -> FieldLocation:
        own = {o.segment for o in self.observations if o.dimension == KEYBOARD_OPEN}
        inside: set[tuple[int, int]] = set()
        outside: set[int] = set()
        for obs in self.observations:
            for f in obs.packet.fields:
                if f.value.kind != FieldKind.EVENT_CODE:
                    continue
                if obs.segment in own:
                    inside.add((f.field_id, int(f.value.value)))  # type: ignore[arg-type]
                else:
                    outside.add(f.field_id)
        found = sorted((fid, code) for fid, code in inside if fid not in outside)
        if not found:
            raise NoCandidate("No field appears only while the keyboard opens")
        if len(found) > 1:
            raise AmbiguousField(f"Several fields appear only while the keyboard opens: {found}")
        fid, code = found[0]
        return FieldLocation(fid, event_code=code)

    def _rotation_index(self, channels: dict[str, FieldLocation], part: str) -> Optional[FieldLocation]:
        slot = channels.get(rotation_channel(part, "a"))
        if slot is None or slot.sub_index is None:
            return None
        for obs in self.observations:
            value = obs.packet.get(slot.field_id)
            if value is None or value.type_code is None:
                continue
            spec = self.registry.get(value.type_code)
            if spec is None:
                return None
            for i, sub in enumerate(spec.layout):
                if sub.kind == "quat_index":
                    return FieldLocation(slot.field_id, i)
            return None
        return None

    def semantics(self) -> FieldSemanticsMap:
        if not self.observations:
            raise NoCandidate("No motion packets matched the isolation scripts")

        first = self.observations[0].packet
        uid = _find_kind(first, FieldKind.USER_ID)
        tick = _find_kind(first, FieldKind.TICK_STAMP)
        if uid is None or tick is None:
            raise NoCandidate("Motion packets carry no user id or tick field")

        channels: dict[str, FieldLocation] = {
            USER_ID: FieldLocation(uid[0]),
            TICK: FieldLocation(tick[0]),
        }
        table = self._values_by_segment()
        dimensions = sorted({o.dimension for o in self.observations if o.dimension not in (None, KEYBOARD_OPEN)})
        for dimension in dimensions:
            assert dimension is not None
            key = self._locate(dimension, table)
            conversion = self._fit(dimension, key)
            channels[channel_for_dimension(dimension)] = FieldLocation(key[0], key[1], conversion)
            logger.info("Input %s -> field %#x[%s] (scale %.6g, bias %.6g)", dimension, key[0], key[1], conversion.scale, conversion.bias)

        if any(o.dimension == KEYBOARD_OPEN for o in self.observations):
            channels[KEYBOARD_OPEN] = self._locate_event()

        for part in ("head", "left", "right"):
            index = self._rotation_index(channels, part)
            if index is not None:
                channels[rotation_index_channel(part)] = index

        return FieldSemanticsMap(channels)


def correlate_fields(
    scripts: Sequence[MotionScript], traces: Sequence[TraceFile], registry: CustomTypeRegistry
) -> FieldSemanticsMap:
    if len(scripts) != len(traces):
        raise ValueError(f"Got {len(scripts)} isolation scripts but {len(traces)} traces")
    correlator = FieldCorrelator(registry)
    for script, trace in zip(scripts, traces):
        correlator.add(script, trace)
    return correlator.semantics()
