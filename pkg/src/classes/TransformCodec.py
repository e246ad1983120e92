from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..utils.codec_utils import (
    dequantize_component,
    quantize_component,
    reconstruct_from_smallest_three,
    split_smallest_three,
)
from ..utils.errors import OutOfBounds
from .CustomTypeRegistry import CustomObjectSpec, CustomTypeRegistry, SubFieldValue
from .Transform import Transform, Vec3

QUANTIZED_TYPE = "transform_q"
FLOAT_TYPE = "transform_f32"
POSITION_NAMES = ("pos_x", "pos_y", "pos_z")
ROTATION_NAMES = ("rot_a", "rot_b", "rot_c")
INDEX_NAME = "rot_index"


@dataclass(frozen=True)
class QuantizedTransformCodec:
    """Packs a Transform into one custom object: per-axis positions plus a smallest-three rotation.

    The quantized type stores positions as unsigned integers over [min, max] and the
    three smallest quaternion components as unsigned integers over
    [-1/sqrt(2), 1/sqrt(2)]. The float type carries the same sub-fields as f32.
    """

    spec: CustomObjectSpec
    position_min: tuple[float, float, float] = (-8.0, -8.0, -8.0)
    position_max: tuple[float, float, float] = (8.0, 8.0, 8.0)
    trigger_bits: int = 8

    def __post_init__(self) -> None:
        for name in (*POSITION_NAMES, INDEX_NAME, *ROTATION_NAMES):
            self.spec.index_of(name)
        for lo, hi in zip(self.position_min, self.position_max):
            if not lo < hi:
                raise ValueError(f"Position bounds must satisfy min < max, got [{lo}, {hi}]")
        if not 1 <= self.trigger_bits <= 8:
            raise ValueError(f"Trigger bits must be in [1, 8], got {self.trigger_bits}")

    @classmethod
    def for_registry(
        cls,
        registry: CustomTypeRegistry,
        quantized: bool = True,
        position_min: float = -8.0,
        position_max: float = 8.0,
        trigger_bits: int = 8,
    ) -> QuantizedTransformCodec:
        spec = registry.by_name(QUANTIZED_TYPE if quantized else FLOAT_TYPE)
        return cls(spec, (position_min,) * 3, (position_max,) * 3, trigger_bits)

    @property
    def type_code(self) -> int:
        return self.spec.type_code

    @property
    def quantized(self) -> bool:
        return self.spec.layout[self.spec.index_of("pos_x")].kind == "position"

    def _bits(self, name: str) -> int:
        return self.spec.layout[self.spec.index_of(name)].bits

    @property
    def rotation_bits(self) -> int:
        return self._bits("rot_a")

    def position_bits(self, axis: int) -> int:
        return self._bits(POSITION_NAMES[axis])

    def position_error_bound(self) -> tuple[float, float, float]:
        """Per-axis worst-case roundtrip error, (max - min) / 2^bits."""
        if not self.quantized:
            return (0.0, 0.0, 0.0)
        return tuple(  # type: ignore[return-value]
            (self.position_max[i] - self.position_min[i]) / (1 << self.position_bits(i)) for i in range(3)
        )

    def position_scale(self, axis: int) -> float:
        """Meters per raw unit for a quantized axis."""
        levels = (1 << self.position_bits(axis)) - 1
        return (self.position_max[axis] - self.position_min[axis]) / levels

    def check_bounds(self, position: Vec3) -> None:
        for axis, value in enumerate(position.as_tuple()):
            if not self.position_min[axis] <= value <= self.position_max[axis]:
                raise OutOfBounds(
                    f"Position {position.as_tuple()} axis {'xyz'[axis]}={value} is outside "
                    f"[{self.position_min[axis]}, {self.position_max[axis]}]"
                )

    def encode(self, t: Transform) -> dict[str, SubFieldValue]:
        self.check_bounds(t.position)
        index, rest = split_smallest_three(t.rotation.normalized())
        values: dict[str, SubFieldValue] = {INDEX_NAME: index}

        for axis, name in enumerate(POSITION_NAMES):
            p = t.position.as_tuple()[axis]
            if self.quantized:
                levels = (1 << self.position_bits(axis)) - 1
                raw = int(round((p - self.position_min[axis]) / self.position_scale(axis)))
                values[name] = min(levels, max(0, raw))
            else:
                values[name] = p

        for name, comp in zip(ROTATION_NAMES, rest):
            values[name] = quantize_component(comp, self.rotation_bits) if self.quantized else comp
        return values

    def decode(self, values: Sequence[SubFieldValue]) -> Transform:
        by_name = {f.name: v for f, v in zip(self.spec.layout, values, strict=True)}
        if self.quantized:
            pos = [
                int(by_name[name]) * self.position_scale(axis) + self.position_min[axis]
                for axis, name in enumerate(POSITION_NAMES)
            ]
            rest = [dequantize_component(int(by_name[name]), self.rotation_bits) for name in ROTATION_NAMES]
        else:
            pos = [float(by_name[name]) for name in POSITION_NAMES]
            rest = [float(by_name[name]) for name in ROTATION_NAMES]
        rotation = reconstruct_from_smallest_three(int(by_name[INDEX_NAME]), (rest[0], rest[1], rest[2]))
        return Transform(Vec3(pos[0], pos[1], pos[2]), rotation)

    def pack(self, t: Transform) -> bytes:
        return self.spec.pack(self.encode(t))
