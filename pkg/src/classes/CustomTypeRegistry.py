"""Registry of custom object types carried as byte strings inside packets.

A registry file is a KEY=VALUE text file with two keys per type code::

    TYPE_16_NAME=transform_q
    TYPE_16_LAYOUT=pos_x:position:16 pos_y:position:16 ...

Layout entries are ``name:kind:bits`` and are packed LSB-first in order.
"""

from __future__ import annotations

import io
import re
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional

from dotenv import dotenv_values

from ..utils.codec_utils import pack_bits, unpack_bits
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

SUB_FIELD_KINDS = {"position", "quat_index", "quat_component", "uint", "f32"}
MAX_TYPE_CODES = 256
_KEY_PATTERN = re.compile(r"^TYPE_(\d+)_(NAME|LAYOUT)$")

SubFieldValue = int | float


@dataclass(frozen=True)
class SubFieldSpec:
    name: str
    kind: str
    bits: int

    def __post_init__(self) -> None:
        if self.kind not in SUB_FIELD_KINDS:
            raise ValueError(f"Unknown sub-field kind {self.kind!r} for {self.name}")
        if self.kind == "f32" and self.bits != 32:
            raise ValueError(f"f32 sub-field {self.name} must be 32 bits, got {self.bits}")
        if not 1 <= self.bits <= 32:
            raise ValueError(f"Sub-field {self.name} width must be in [1, 32], got {self.bits}")

    def to_raw(self, value: SubFieldValue) -> int:
        if self.kind == "f32":
            return int.from_bytes(struct.pack("<f", float(value)), "little")
        return int(value)

    def from_raw(self, raw: int) -> SubFieldValue:
        if self.kind == "f32":
            return float(struct.unpack("<f", raw.to_bytes(4, "little"))[0])
        return raw


@dataclass(frozen=True)
class CustomObjectSpec:
    type_code: int
    name: str
    layout: tuple[SubFieldSpec, ...]

    @property
    def total_bits(self) -> int:
        return sum(f.bits for f in self.layout)

    @property
    def byte_length(self) -> int:
        return (self.total_bits + 7) // 8

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.layout):
            if f.name == name:
                return i
        raise KeyError(f"{self.name} has no sub-field {name!r}")

    def pack(self, values: Mapping[str, SubFieldValue] | Iterable[SubFieldValue]) -> bytes:
        if isinstance(values, Mapping):
            ordered = [values[f.name] for f in self.layout]
        else:
            ordered = list(values)
        raws = [f.to_raw(v) for f, v in zip(self.layout, ordered, strict=True)]
        packed = pack_bits(raws, [f.bits for f in self.layout])
        return packed.to_bytes(self.byte_length, "little")

    def unpack(self, blob: bytes) -> tuple[SubFieldValue, ...]:
        if len(blob) != self.byte_length:
            raise ValueError(f"{self.name} expects {self.byte_length} bytes, got {len(blob)}")
        raws = unpack_bits(int.from_bytes(blob, "little"), [f.bits for f in self.layout])
        return tuple(f.from_raw(r) for f, r in zip(self.layout, raws))

    def layout_text(self) -> str:
        return " ".join(f"{f.name}:{f.kind}:{f.bits}" for f in self.layout)


class CustomTypeRegistry:
    """Immutable set of custom object specs keyed by type code."""

    def __init__(self, specs: Iterable[CustomObjectSpec]) -> None:
        by_code: dict[int, CustomObjectSpec] = {}
        for spec in specs:
            if not 0 <= spec.type_code < MAX_TYPE_CODES:
                raise ValueError(f"Type code {spec.type_code} is outside [0, {MAX_TYPE_CODES})")
            if spec.type_code in by_code:
                raise ValueError(f"Duplicate type code {spec.type_code} in registry")
            by_code[spec.type_code] = spec
        self._by_code = by_code

    @classmethod
    def from_text(cls, text: str) -> CustomTypeRegistry:
        values = dotenv_values(stream=io.StringIO(text))
        names: dict[int, str] = {}
        layouts: dict[int, str] = {}
        for key, value in values.items():
            match = _KEY_PATTERN.match(key)
            if not match or value is None:
                raise ValueError(f"Unrecognised registry entry: {key}")
            code = int(match.group(1))
            if match.group(2) == "NAME":
                names[code] = value
            else:
                layouts[code] = value

        if set(names) != set(layouts):
            raise ValueError(f"Registry types need both NAME and LAYOUT: {sorted(set(names) ^ set(layouts))}")

        specs = [
            CustomObjectSpec(code, names[code], _parse_layout(layouts[code]))
            for code in sorted(names)
        ]
        return cls(specs)

    @classmethod
    def load(cls, path: str | Path) -> CustomTypeRegistry:
        registry = cls.from_text(Path(path).read_text())
        logger.info("Loaded %s custom types from %s", len(registry), path)
        return registry

    def to_text(self) -> str:
        lines: list[str] = []
        for spec in self:
            lines.append(f"TYPE_{spec.type_code}_NAME={spec.name}")
            lines.append(f'TYPE_{spec.type_code}_LAYOUT="{spec.layout_text()}"')
        return "\n".join(lines) + "\n"

    def get(self, type_code: int) -> Optional[CustomObjectSpec]:
        return self._by_code.get(type_code)

    def by_name(self, name: str) -> CustomObjectSpec:
        for spec in self:
            if spec.name == name:
                return spec
        raise KeyError(f"No custom type named {name!r}")

    def with_widths(self, position_bits: int, rotation_bits: int) -> CustomTypeRegistry:
        """Copy of this registry with position and quaternion-component widths replaced."""

        def resize(f: SubFieldSpec) -> SubFieldSpec:
            if f.kind == "position":
                return replace(f, bits=position_bits)
            if f.kind == "quat_component":
                return replace(f, bits=rotation_bits)
            return f

        return CustomTypeRegistry(
            replace(spec, layout=tuple(resize(f) for f in spec.layout)) for spec in self
        )

    def __iter__(self) -> Iterator[CustomObjectSpec]:
        return iter(self._by_code[c] for c in sorted(self._by_code))

    def __len__(self) -> int:
        return len(self._by_code)

    def __contains__(self, type_code: object) -> bool:
        return type_code in self._by_code


def _parse_layout(text: str) -> tuple[SubFieldSpec, ...]:
    fields: list[SubFieldSpec] = []
    for token in text.split():
        parts = token.split(":")
        if len(parts) != 3:
            raise ValueError(f"Layout entry must be name:kind:bits, got {token!r}")
        name, kind, bits = parts
        fields.append(SubFieldSpec(name, kind, int(bits)))
    if not fields:
        raise ValueError("Custom type layout is empty")
    return tuple(fields)
