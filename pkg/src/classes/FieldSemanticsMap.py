"""Where each motion semantic lives in a parsed packet, and how to convert it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..utils.codec_utils import reconstruct_from_smallest_three
from .Packet import Packet
from .Transform import Transform, Vec3

BODY_PARTS = ("head", "left", "right")
HANDS = ("left", "right")
POSITION_AXES = ("x", "y", "z")
ROTATION_SLOTS = ("a", "b", "c")

USER_ID = "user_id"
TICK = "tick"
KEYBOARD_OPEN = "keyboard_open"


def position_channel(part: str, axis: str) -> str:
    return f"{part}.pos.{axis}"


def rotation_channel(part: str, slot: str) -> str:
    return f"{part}.rot.{slot}"


def rotation_index_channel(part: str) -> str:
    return f"{part}.rot.index"


def trigger_channel(hand: str) -> str:
    return f"{hand}.trigger"


def motion_channels() -> list[str]:
    """Channels the correlator recovers from input sweeps."""
    channels: list[str] = []
    for part in BODY_PARTS:
        channels += [position_channel(part, a) for a in POSITION_AXES]
        channels += [rotation_channel(part, s) for s in ROTATION_SLOTS]
    channels += [trigger_channel(h) for h in HANDS]
    return channels


@dataclass(frozen=True)
class Conversion:
    """Affine map from a raw field value to semantic units: value = scale * raw + bias."""

    scale: float = 1.0
    bias: float = 0.0

    def apply(self, raw: float) -> float:
        return self.scale * raw + self.bias

    def invert(self, value: float) -> float:
        return (value - self.bias) / self.scale


@dataclass(frozen=True)
class FieldLocation:
    field_id: int
    sub_index: Optional[int] = None
    conversion: Conversion = field(default_factory=Conversion)
    event_code: Optional[int] = None

    def read(self, packet: Packet) -> Optional[float]:
        value = packet.get(self.field_id)
        if value is None:
            return None
        if self.sub_index is None:
            return self.conversion.apply(float(value.value))  # type: ignore[arg-type]
        if value.sub_fields is None:
            return None
        return self.conversion.apply(float(value.sub_fields[self.sub_index]))


@dataclass(frozen=True)
class FieldSemanticsMap:
    channels: dict[str, FieldLocation]

    def __post_init__(self) -> None:
        seen: dict[tuple[int, Optional[int]], str] = {}
        for name, loc in self.channels.items():
            if loc.conversion.scale == 0.0:
                raise ValueError(f"Conversion for {name} is not invertible (scale 0)")
            if loc.event_code is not None:
                continue
            key = (loc.field_id, loc.sub_index)
            if key in seen:
                raise ValueError(f"Channels {seen[key]} and {name} share field {key}")
            seen[key] = name

    def location(self, channel: str) -> FieldLocation:
        try:
            return self.channels[channel]
        except KeyError:
            raise ValueError(f"Semantics map has no channel {channel!r}") from None

    def read(self, packet: Packet, channel: str) -> Optional[float]:
        return self.location(channel).read(packet)

    def user_id(self, packet: Packet) -> Optional[int]:
        value = self.read(packet, USER_ID)
        return None if value is None else int(value)

    def tick(self, packet: Packet) -> Optional[int]:
        value = self.read(packet, TICK)
        return None if value is None else int(value)

    def trigger(self, packet: Packet, hand: str) -> Optional[float]:
        return self.read(packet, trigger_channel(hand))

    def trigger_step(self, hand: str) -> float:
        """Semantic size of one raw trigger level."""
        return abs(self.location(trigger_channel(hand)).conversion.scale)

    def has_keyboard_open(self, packet: Packet) -> bool:
        loc = self.location(KEYBOARD_OPEN)
        value = packet.get(loc.field_id)
        return value is not None and value.value == loc.event_code

    def transform(self, packet: Packet, part: str) -> Optional[Transform]:
        pos = [self.read(packet, position_channel(part, a)) for a in POSITION_AXES]
        rest = [self.read(packet, rotation_channel(part, s)) for s in ROTATION_SLOTS]
        index = self.read(packet, rotation_index_channel(part))
        if index is None or any(v is None for v in (*pos, *rest)):
            return None
        rotation = reconstruct_from_smallest_three(
            int(index), (float(rest[0]), float(rest[1]), float(rest[2]))  # type: ignore[arg-type]
        )
        return Transform(Vec3(*(float(p) for p in pos)), rotation)  # type: ignore[arg-type]

    def field_ids(self) -> set[int]:
        return {loc.field_id for loc in self.channels.values()}

    def to_dict(self) -> dict[str, Any]:
        return {
            name: {
                "field_id": loc.field_id,
                "sub_index": loc.sub_index,
                "scale": loc.conversion.scale,
                "bias": loc.conversion.bias,
                "event_code": loc.event_code,
            }
            for name, loc in sorted(self.channels.items())
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FieldSemanticsMap:
        return cls(
            {
                name: FieldLocation(
                    field_id=int(entry["field_id"]),
                    sub_index=entry["sub_index"],
                    conversion=Conversion(float(entry["scale"]), float(entry["bias"])),
                    event_code=entry["event_code"],
                )
                for name, entry in data.items()
            }
        )
