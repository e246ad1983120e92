"""Datagram framing and typed fields.

See docs/wire-format.md for the byte layout. All integers are little-endian.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from ..utils.errors import MalformedPacket, UnknownCustomType
from .CustomTypeRegistry import CustomTypeRegistry, SubFieldValue

PROTOCOL_MAGIC = 0x5652
PROTOCOL_VERSION = 1
MAX_PACKET_BYTES = 1200
MAX_BLOB_BYTES = 512
MIN_FIELD_ID = 0x01
MAX_FIELD_ID = 0xEF

_HEADER = struct.Struct("<HBBIB")
_BLOB_HEADER = struct.Struct("<BH")


class FieldKind(IntEnum):
    U8 = 1
    I32 = 2
    F32 = 3
    BOOLEAN = 4
    BYTE_STRING = 5
    USER_ID = 6
    TICK_STAMP = 7
    EVENT_CODE = 8


_SCALAR_FORMATS: dict[FieldKind, struct.Struct] = {
    FieldKind.U8: struct.Struct("<B"),
    FieldKind.I32: struct.Struct("<i"),
    FieldKind.F32: struct.Struct("<f"),
    FieldKind.BOOLEAN: struct.Struct("<B"),
    FieldKind.USER_ID: struct.Struct("<I"),
    FieldKind.TICK_STAMP: struct.Struct("<I"),
    FieldKind.EVENT_CODE: struct.Struct("<B"),
}


@dataclass(frozen=True)
class FieldValue:
    kind: FieldKind
    value: int | float | bool | bytes
    type_code: Optional[int] = None
    sub_fields: Optional[tuple[SubFieldValue, ...]] = None

    @property
    def is_opaque(self) -> bool:
        return self.kind == FieldKind.BYTE_STRING and self.sub_fields is None

    @property
    def blob(self) -> bytes:
        if not isinstance(self.value, bytes):
            raise TypeError(f"{self.kind.name} field has no byte payload")
        return self.value


@dataclass(frozen=True)
class Field:
    field_id: int
    value: FieldValue


@dataclass(frozen=True)
class PacketHeader:
    channel: int
    sequence: int
    magic: int = PROTOCOL_MAGIC
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class Packet:
    header: PacketHeader
    fields: tuple[Field, ...]

    def get(self, field_id: int) -> Optional[FieldValue]:
        for f in self.fields:
            if f.field_id == field_id:
                return f.value
        return None

    def field_ids(self) -> list[int]:
        return [f.field_id for f in self.fields]

    def to_bytes(self) -> bytes:
        return serialize_packet(self)


def serialize_packet(packet: Packet) -> bytes:
    h = packet.header
    parts = [_HEADER.pack(h.magic, h.version, h.channel, h.sequence, len(packet.fields))]
    for f in packet.fields:
        if not MIN_FIELD_ID <= f.field_id <= MAX_FIELD_ID:
            raise ValueError(f"Field id {f.field_id:#x} is outside the valid range")
        v = f.value
        parts.append(bytes([f.field_id, int(v.kind)]))
        if v.kind == FieldKind.BYTE_STRING:
            blob = v.blob
            if len(blob) > MAX_BLOB_BYTES:
                raise ValueError(f"Byte string of {len(blob)} bytes exceeds {MAX_BLOB_BYTES}")
            parts.append(_BLOB_HEADER.pack(v.type_code or 0, len(blob)))
            parts.append(blob)
        else:
            parts.append(_SCALAR_FORMATS[v.kind].pack(v.value))

    raw = b"".join(parts)
    if len(raw) > MAX_PACKET_BYTES:
        raise ValueError(f"Packet of {len(raw)} bytes exceeds {MAX_PACKET_BYTES}")
    return raw


class _Reader:
    def __init__(self, raw: bytes) -> None:
        self._raw = raw
        self.offset = 0

    def take(self, fmt: struct.Struct) -> tuple[int | float, ...]:
        if self.offset + fmt.size > len(self._raw):
            raise MalformedPacket(f"Truncated at byte {self.offset}: need {fmt.size} more")
        values = fmt.unpack_from(self._raw, self.offset)
        self.offset += fmt.size
        return values

    def take_bytes(self, n: int) -> bytes:
        if self.offset + n > len(self._raw):
            raise MalformedPacket(f"Truncated at byte {self.offset}: need {n} more")
        chunk = self._raw[self.offset : self.offset + n]
        self.offset += n
        return chunk

    @property
    def remaining(self) -> int:
        return len(self._raw) - self.offset


def parse_packet(raw: bytes, registry: Optional[CustomTypeRegistry] = None) -> Packet:
    """Parse a datagram into typed fields.

    With a registry, custom objects are expanded into sub-fields. Without one, or
    when a type code is unknown, they stay opaque byte strings.
    """
    if len(raw) > MAX_PACKET_BYTES:
        raise MalformedPacket(f"Datagram of {len(raw)} bytes exceeds {MAX_PACKET_BYTES}")

    reader = _Reader(raw)
    magic, version, channel, sequence, count = (int(x) for x in reader.take(_HEADER))
    if magic != PROTOCOL_MAGIC:
        raise MalformedPacket(f"Bad magic {magic:#06x}")
    if version != PROTOCOL_VERSION:
        raise MalformedPacket(f"Unsupported protocol version {version}")

    fields: list[Field] = []
    seen: set[int] = set()
    for _ in range(count):
        field_id, kind_code = reader.take_bytes(2)
        if not MIN_FIELD_ID <= field_id <= MAX_FIELD_ID:
            raise MalformedPacket(f"Unknown field id {field_id:#x}")
        if field_id in seen:
            raise MalformedPacket(f"Duplicate field id {field_id:#x}")
        seen.add(field_id)
        try:
            kind = FieldKind(kind_code)
        except ValueError:
            raise MalformedPacket(f"Unknown field kind {kind_code} for field {field_id:#x}") from None

        if kind == FieldKind.BYTE_STRING:
            value = _parse_blob(reader, registry)
        else:
            (scalar,) = reader.take(_SCALAR_FORMATS[kind])
            if kind == FieldKind.BOOLEAN:
                if scalar not in (0, 1):
                    raise MalformedPacket(f"Boolean field {field_id:#x} holds {scalar}")
                value = FieldValue(kind, bool(scalar))
            else:
                value = FieldValue(kind, scalar)
        fields.append(Field(field_id, value))

    if reader.remaining:
        raise MalformedPacket(f"{reader.remaining} trailing bytes after {count} fields")

    return Packet(PacketHeader(channel=channel, sequence=sequence, magic=magic, version=version), tuple(fields))


def _parse_blob(reader: _Reader, registry: Optional[CustomTypeRegistry]) -> FieldValue:
    type_code, length = (int(x) for x in reader.take(_BLOB_HEADER))
    if length > MAX_BLOB_BYTES:
        raise MalformedPacket(f"Byte string length {length} exceeds {MAX_BLOB_BYTES}")
    blob = reader.take_bytes(length)

    if registry is None:
        return FieldValue(FieldKind.BYTE_STRING, blob, type_code=type_code)

    spec = registry.get(type_code)
    if spec is None:
        warnings.warn(f"Custom type {type_code} not in registry; left opaque", UnknownCustomType, stacklevel=3)
        return FieldValue(FieldKind.BYTE_STRING, blob, type_code=type_code)
    if length != spec.byte_length:
        raise MalformedPacket(f"{spec.name} blob is {length} bytes, expected {spec.byte_length}")
    return FieldValue(FieldKind.BYTE_STRING, blob, type_code=type_code, sub_fields=spec.unpack(blob))
