"""Attacker-side capture of received datagrams.

Binary layout (little-endian)::

    b"VRTR" | version u16 | header_len u32 | header JSON (utf-8)
    record* : recv_time_us u64 | source_id u16 | length u16 | raw

The text dump is one JSON header line followed by ``recv_us source hex`` lines.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..utils.logger import setup_logger

logger = setup_logger(__name__)

TRACE_MAGIC = b"VRTR"
TRACE_VERSION = 1

_PREAMBLE = struct.Struct("<4sHI")
_RECORD = struct.Struct("<QHH")


@dataclass(frozen=True)
class TraceRecord:
    recv_time_us: int
    source_id: int
    raw: bytes


@dataclass
class TraceFile:
    config: dict[str, Any] = field(default_factory=lambda: {})
    start_time: str = ""
    records: list[TraceRecord] = field(default_factory=lambda: [])

    def __len__(self) -> int:
        return len(self.records)

    def with_records(self, records: Iterable[TraceRecord]) -> TraceFile:
        return TraceFile(dict(self.config), self.start_time, list(records))

    def source_counts(self) -> Counter[int]:
        return Counter(r.source_id for r in self.records)

    def is_time_ordered(self) -> bool:
        return all(a.recv_time_us <= b.recv_time_us for a, b in zip(self.records, self.records[1:]))

    def header(self) -> dict[str, Any]:
        return {"config": self.config, "start_time": self.start_time}

    def to_bytes(self) -> bytes:
        header = json.dumps(self.header(), sort_keys=True).encode("utf-8")
        parts = [_PREAMBLE.pack(TRACE_MAGIC, TRACE_VERSION, len(header)), header]
        for r in self.records:
            parts.append(_RECORD.pack(r.recv_time_us, r.source_id, len(r.raw)))
            parts.append(r.raw)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> TraceFile:
        if len(data) < _PREAMBLE.size:
            raise ValueError("Trace is shorter than its preamble")
        magic, version, header_len = _PREAMBLE.unpack_from(data, 0)
        if magic != TRACE_MAGIC:
            raise ValueError(f"Not a trace file (magic {magic!r})")
        if version != TRACE_VERSION:
            raise ValueError(f"Unsupported trace version {version}")

        offset = _PREAMBLE.size
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
        offset += header_len

        records: list[TraceRecord] = []
        while offset < len(data):
            if offset + _RECORD.size > len(data):
                raise ValueError(f"Truncated record header at byte {offset}")
            recv_us, source, length = _RECORD.unpack_from(data, offset)
            offset += _RECORD.size
            if offset + length > len(data):
                raise ValueError(f"Truncated record payload at byte {offset}")
            records.append(TraceRecord(recv_us, source, data[offset : offset + length]))
            offset += length

        return cls(header.get("config", {}), header.get("start_time", ""), records)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())
        logger.info("Wrote trace with %s records to %s", len(self), path)

    @classmethod
    def load(cls, path: str | Path) -> TraceFile:
        trace = cls.from_bytes(Path(path).read_bytes())
        logger.info("Loaded trace with %s records from %s", len(trace), path)
        return trace

    def dump_text(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [f"{r.recv_time_us} {r.source_id} {r.raw.hex()}" for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def load_text(cls, text: str) -> TraceFile:
        lines = text.splitlines()
        if not lines:
            raise ValueError("Empty trace dump")
        header = json.loads(lines[0])
        records: list[TraceRecord] = []
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"Bad trace dump line {number}: {line!r}")
            raw = bytes.fromhex(parts[2]) if len(parts) == 3 else b""
            records.append(TraceRecord(int(parts[0]), int(parts[1]), raw))
        return cls(header.get("config", {}), header.get("start_time", ""), records)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def degrade_trace(trace: TraceFile, extra_drop: float, seed: int) -> TraceFile:
    """Drop each record independently with probability extra_drop."""
    if not 0.0 <= extra_drop <= 1.0:
        raise ValueError(f"extra_drop must be in [0, 1], got {extra_drop}")
    rng = np.random.default_rng(seed)
    keep = rng.random(len(trace.records)) >= extra_drop
    survivors = [r for r, k in zip(trace.records, keep) if k]
    logger.info(
        "Degraded trace at %.0f%%: %s of %s records survive", extra_drop * 100, len(survivors), len(trace)
    )
    return trace.with_records(survivors)
