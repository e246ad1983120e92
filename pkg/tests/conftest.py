from typing import Callable, Optional

import pytest

from src.classes.CustomTypeRegistry import CustomTypeRegistry
from src.classes.FieldSemanticsMap import FieldSemanticsMap
from src.classes.KeyboardModel import KeyboardModel
from src.classes.LabConfig import resolve_path
from src.classes.MotionUpdate import MotionUpdate, encode_motion_update, ground_truth_semantics
from src.classes.Packet import Packet, parse_packet
from src.classes.Transform import Transform, UnitQuat, Vec3
from src.classes.TransformCodec import QuantizedTransformCodec

HEAD = Transform(Vec3(0.0, 1.6, 0.0), UnitQuat.identity())
LEFT = Transform(Vec3(-0.18, 1.25, -0.15), UnitQuat.identity())
RIGHT = Transform(Vec3(0.18, 1.25, -0.15), UnitQuat.identity())

MotionPacketFactory = Callable[..., Packet]


@pytest.fixture(scope="session")
def registry() -> CustomTypeRegistry:
    return CustomTypeRegistry.load(resolve_path("assets/motion.registry"))


@pytest.fixture(scope="session")
def codec(registry: CustomTypeRegistry) -> QuantizedTransformCodec:
    return QuantizedTransformCodec.for_registry(registry)


@pytest.fixture(scope="session")
def float_codec(registry: CustomTypeRegistry) -> QuantizedTransformCodec:
    return QuantizedTransformCodec.for_registry(registry, quantized=False)


@pytest.fixture(scope="session")
def keyboard() -> KeyboardModel:
    return KeyboardModel.from_layout()


@pytest.fixture(scope="session")
def sem(codec: QuantizedTransformCodec) -> FieldSemanticsMap:
    return ground_truth_semantics(codec)


@pytest.fixture
def motion_packet(registry: CustomTypeRegistry, codec: QuantizedTransformCodec) -> MotionPacketFactory:
    """One motion packet as the attacker parses it off the wire, hands at rest unless given."""

    def build(
        tick: int,
        left_trigger: float = 0.0,
        right_trigger: float = 0.0,
        event: Optional[int] = None,
        user_id: int = 1,
        right: Transform = RIGHT,
        head: Transform = HEAD,
    ) -> Packet:
        update = MotionUpdate(
            user_id=user_id,
            tick=tick,
            head=head,
            left=LEFT,
            right=right,
            left_trigger=left_trigger,
            right_trigger=right_trigger,
            event=event,
        )
        return parse_packet(encode_motion_update(update, registry, codec, sequence=tick).to_bytes(), registry)

    return build
