"""Per-tick motion state and its packet encoding."""

from __future__ import annotations

from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        def __str__(self) -> str:
            return str(self.value)
from typing import Optional

from ..utils.codec_utils import COMPONENT_LIMIT
from .CustomTypeRegistry import CustomTypeRegistry
from .FieldSemanticsMap import (
    KEYBOARD_OPEN,
    POSITION_AXES,
    ROTATION_SLOTS,
    TICK,
    USER_ID,
    Conversion,
    FieldLocation,
    FieldSemanticsMap,
    position_channel,
    rotation_channel,
    rotation_index_channel,
    trigger_channel,
)
from .Packet import Field, FieldKind, FieldValue, Packet, PacketHeader
from .TransformCodec import INDEX_NAME, POSITION_NAMES, ROTATION_NAMES, QuantizedTransformCodec
from .Transform import Transform

MOTION_CHANNEL = 1

FIELD_USER_ID = 0x01
FIELD_TICK = 0x02
FIELD_HEAD = 0x10
FIELD_LEFT = 0x11
FIELD_RIGHT = 0x12
FIELD_LEFT_TRIGGER = 0x20
FIELD_RIGHT_TRIGGER = 0x21
FIELD_EVENT = 0x30

EVENT_KEYBOARD_OPEN = 0x01

PART_FIELDS = {"head": FIELD_HEAD, "left": FIELD_LEFT, "right": FIELD_RIGHT}
TRIGGER_FIELDS = {"left": FIELD_LEFT_TRIGGER, "right": FIELD_RIGHT_TRIGGER}


class Hand(StrEnum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class MotionUpdate:
    user_id: int
    tick: int
    head: Transform
    left: Transform
    right: Transform
    left_trigger: float = 0.0
    right_trigger: float = 0.0
    event: Optional[int] = None

    def hand(self, hand: Hand | str) -> Transform:
        return self.left if hand == Hand.LEFT else self.right

    def trigger(self, hand: Hand | str) -> float:
        return self.left_trigger if hand == Hand.LEFT else self.right_trigger


def quantize_trigger(value: float, bits: int = 8) -> int:
    levels = (1 << bits) - 1
    return min(levels, max(0, int(round(value * levels))))


def dequantize_trigger(raw: int, bits: int = 8) -> float:
    return raw / ((1 << bits) - 1)


def encode_motion_update(
    update: MotionUpdate,
    registry: CustomTypeRegistry,
    codec: QuantizedTransformCodec,
    sequence: int = 0,
) -> Packet:
    """Build the motion packet for one user and tick. Raises OutOfBounds for positions outside the codec range."""
    if codec.type_code not in registry:
        raise ValueError(f"Codec type {codec.spec.name} ({codec.type_code}) is not registered")

    fields = [
        Field(FIELD_USER_ID, FieldValue(FieldKind.USER_ID, update.user_id)),
        Field(FIELD_TICK, FieldValue(FieldKind.TICK_STAMP, update.tick)),
    ]
    for part, field_id in PART_FIELDS.items():
        blob = codec.pack(getattr(update, part))
        fields.append(Field(field_id, FieldValue(FieldKind.BYTE_STRING, blob, type_code=codec.type_code)))
    for hand, field_id in TRIGGER_FIELDS.items():
        raw = quantize_trigger(update.trigger(hand), codec.trigger_bits)
        fields.append(Field(field_id, FieldValue(FieldKind.U8, raw)))
    if update.event is not None:
        fields.append(Field(FIELD_EVENT, FieldValue(FieldKind.EVENT_CODE, update.event)))

    return Packet(PacketHeader(channel=MOTION_CHANNEL, sequence=sequence), tuple(fields))


def decode_motion_update(packet: Packet, codec: QuantizedTransformCodec) -> MotionUpdate:
    """Inverse of encode_motion_update for a packet parsed with the registry."""

    def transform(field_id: int) -> Transform:
        value = packet.get(field_id)
        if value is None or value.sub_fields is None:
            raise ValueError(f"Packet lacks expanded transform field {field_id:#x}")
        return codec.decode(value.sub_fields)

    def scalar(field_id: int) -> int:
        value = packet.get(field_id)
        if value is None:
            raise ValueError(f"Packet lacks field {field_id:#x}")
        return int(value.value)  # type: ignore[arg-type]

    event = packet.get(FIELD_EVENT)
    return MotionUpdate(
        user_id=scalar(FIELD_USER_ID),
        tick=scalar(FIELD_TICK),
        head=transform(FIELD_HEAD),
        left=transform(FIELD_LEFT),
        right=transform(FIELD_RIGHT),
        left_trigger=dequantize_trigger(scalar(FIELD_LEFT_TRIGGER), codec.trigger_bits),
        right_trigger=dequantize_trigger(scalar(FIELD_RIGHT_TRIGGER), codec.trigger_bits),
        event=None if event is None else int(event.value),  # type: ignore[arg-type]
    )


def ground_truth_semantics(codec: QuantizedTransformCodec) -> FieldSemanticsMap:
    """The semantics map implied by the encoder; the oracle for field correlation."""
    spec = codec.spec
    channels: dict[str, FieldLocation] = {
        USER_ID: FieldLocation(FIELD_USER_ID),
        TICK: FieldLocation(FIELD_TICK),
        KEYBOARD_OPEN: FieldLocation(FIELD_EVENT, event_code=EVENT_KEYBOARD_OPEN),
    }
    component_levels = (1 << codec.rotation_bits) - 1
    for part, field_id in PART_FIELDS.items():
        for axis, (axis_name, sub_name) in enumerate(zip(POSITION_AXES, POSITION_NAMES)):
            conversion = (
                Conversion(codec.position_scale(axis), codec.position_min[axis])
                if codec.quantized
                else Conversion()
            )
            channels[position_channel(part, axis_name)] = FieldLocation(
                field_id, spec.index_of(sub_name), conversion
            )
        for slot, sub_name in zip(ROTATION_SLOTS, ROTATION_NAMES):
            conversion = (
                Conversion(2.0 * COMPONENT_LIMIT / component_levels, -COMPONENT_LIMIT)
                if codec.quantized
                else Conversion()
            )
            channels[rotation_channel(part, slot)] = FieldLocation(field_id, spec.index_of(sub_name), conversion)
        channels[rotation_index_channel(part)] = FieldLocation(field_id, spec.index_of(INDEX_NAME))
    for hand, field_id in TRIGGER_FIELDS.items():
        channels[trigger_channel(hand)] = FieldLocation(
            field_id, conversion=Conversion(1.0 / ((1 << codec.trigger_bits) - 1), 0.0)
        )
    return FieldSemanticsMap(channels)
