"""Server-mediated motion broadcast over a lossy link, captured at the observer.

Clients sample at the device rate; the server forwards each user's latest sample
once per tick. Loss, jitter and stale updates apply on the server-to-observer leg.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Generator, Optional, Sequence

import numpy as np
import simpy

from ..utils.logger import setup_logger, should_log_progress
from .CustomTypeRegistry import CustomTypeRegistry
from .MotionScript import MotionScript
from .MotionUpdate import MotionUpdate, encode_motion_update
from .Packet import Field, FieldKind, FieldValue, Packet, PacketHeader
from .TraceFile import TraceFile, TraceRecord
from .TransformCodec import QuantizedTransformCodec

logger = setup_logger(__name__)

MOTION_SOURCE_ID = 1
VOICE_CHANNEL = 2
CHAT_CHANNEL = 3
VOICE_TYPE_CODE = 200

# Stream offsets for numpy seed sequences
_DROP_STREAM = 1
_JITTER_STREAM = 2
_STALE_STREAM = 3
_BACKGROUND_STREAM = 100


def sample_index_for_tick(tick: int, device_rate: float, tick_rate: float) -> int:
    """Index of the latest device sample available when tick `tick` is broadcast."""
    return int(math.floor(tick * device_rate / tick_rate + 1e-9))


def tick_count(n_samples: int, device_rate: float, tick_rate: float) -> int:
    return int(math.ceil(n_samples * tick_rate / device_rate - 1e-9))


@dataclass(frozen=True)
class RoomConfig:
    tick_rate: float = 15.0
    device_rate: float = 72.0
    drop_rate: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0
    users: tuple[int, ...] = (1,)
    observer_id: int = 0
    stale_rate: float = 0.0
    event_repeat: int = 3
    burst_loss: bool = False
    burst_enter: float = 0.05
    burst_exit: float = 0.5
    burst_drop_rate: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.tick_rate <= self.device_rate:
            raise ValueError(
                f"Need 0 < tick_rate <= device_rate, got {self.tick_rate} and {self.device_rate}"
            )
        for name in ("drop_rate", "stale_rate", "burst_enter", "burst_exit", "burst_drop_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.jitter_ms < 0.0:
            raise ValueError(f"jitter_ms must be non-negative, got {self.jitter_ms}")
        if self.event_repeat < 1:
            raise ValueError(f"event_repeat must be at least 1, got {self.event_repeat}")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["users"] = list(self.users)
        return data


@dataclass(frozen=True)
class BackgroundSource:
    """Non-motion chatter from another server: "voice" blobs or "chat" messages."""

    source_id: int
    rate: float
    kind: str = "chat"
    drop_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("voice", "chat"):
            raise ValueError(f"Unknown background kind {self.kind!r}")
        if self.rate <= 0.0:
            raise ValueError(f"Background rate must be positive, got {self.rate}")
        if self.source_id == MOTION_SOURCE_ID:
            raise ValueError(f"Source id {MOTION_SOURCE_ID} is reserved for motion")

    def payload(self, index: int, rng: np.random.Generator) -> bytes:
        if self.kind == "voice":
            blob = rng.integers(0, 256, size=int(rng.integers(40, 161)), dtype=np.uint8).tobytes()
            fields = (Field(0x01, FieldValue(FieldKind.BYTE_STRING, blob, type_code=VOICE_TYPE_CODE)),)
            channel = VOICE_CHANNEL
        else:
            fields = (
                Field(0x40, FieldValue(FieldKind.I32, int(rng.integers(0, 2**31 - 1)))),
                Field(0x41, FieldValue(FieldKind.BOOLEAN, bool(rng.integers(0, 2)))),
            )
            channel = CHAT_CHANNEL
        return Packet(PacketHeader(channel=channel, sequence=index), fields).to_bytes()


DEFAULT_BACKGROUND = (
    BackgroundSource(source_id=2, rate=1.0, kind="chat"),
    BackgroundSource(source_id=3, rate=0.2, kind="voice"),
)


class _LossChannel:
    """Bernoulli loss, or Gilbert-Elliott two-state loss when bursts are enabled."""

    def __init__(self, cfg: RoomConfig, rng: np.random.Generator) -> None:
        self._cfg = cfg
        self._rng = rng
        self._bad = False

    def dropped(self) -> bool:
        cfg = self._cfg
        if not cfg.burst_loss:
            return bool(self._rng.random() < cfg.drop_rate)
        if self._bad:
            self._bad = not bool(self._rng.random() < cfg.burst_exit)
        else:
            self._bad = bool(self._rng.random() < cfg.burst_enter)
        rate = cfg.burst_drop_rate if self._bad else cfg.drop_rate
        return bool(self._rng.random() < rate)


class RoomSimulator:
    def __init__(
        self,
        cfg: RoomConfig,
        registry: CustomTypeRegistry,
        codec: QuantizedTransformCodec,
        background: Sequence[BackgroundSource] = (),
    ) -> None:
        self.cfg = cfg
        self.registry = registry
        self.codec = codec
        self.background = list(background)

        ids = [b.source_id for b in self.background]
        if len(ids) != len(set(ids)):
            raise ValueError(f"Duplicate background source ids: {ids}")

        self._records: list[TraceRecord] = []
        self._last_recv_us = 0
        self._jitter_rng = np.random.default_rng([cfg.seed, _JITTER_STREAM])

    def _deliver(self, send_time: float, source_id: int, raw: bytes) -> None:
        delay_ms = abs(float(self._jitter_rng.normal(0.0, self.cfg.jitter_ms))) if self.cfg.jitter_ms else 0.0
        recv_us = int(round((send_time + delay_ms / 1000.0) * 1e6))
        # Jitter shifts timestamps only; arrival order is send order
        recv_us = max(recv_us, self._last_recv_us)
        self._last_recv_us = recv_us
        self._records.append(TraceRecord(recv_us, source_id, raw))

    def _broadcast(self, env: simpy.Environment, victims: Sequence[MotionScript], n_ticks: int) -> Generator[Any, Any, None]:
        cfg = self.cfg
        loss = _LossChannel(cfg, np.random.default_rng([cfg.seed, _DROP_STREAM]))
        stale_rng = np.random.default_rng([cfg.seed, _STALE_STREAM])
        sequences = {v.user_id: 0 for v in victims}
        last_index: dict[int, Optional[int]] = {v.user_id: None for v in victims}
        pending_events: dict[int, list[tuple[int, int]]] = {v.user_id: [] for v in victims}
        sent = dropped = 0

        for tick in range(n_ticks):
            yield env.timeout(tick / cfg.tick_rate - env.now)
            for script in victims:
                uid = script.user_id
                latest = min(sample_index_for_tick(tick, cfg.device_rate, cfg.tick_rate), len(script) - 1)
                previous = last_index[uid]
                first_new = 0 if previous is None else previous + 1
                for i in range(first_new, latest + 1):
                    pending_events[uid] += [(e, cfg.event_repeat) for e in script.samples[i].events]
                last_index[uid] = latest

                index = latest
                if previous is not None and cfg.stale_rate and stale_rng.random() < cfg.stale_rate:
                    index = previous

                event: Optional[int] = None
                if pending_events[uid]:
                    event, remaining = pending_events[uid][0]
                    if remaining > 1:
                        pending_events[uid][0] = (event, remaining - 1)
                    else:
                        pending_events[uid].pop(0)

                sequence = sequences[uid]
                sequences[uid] += 1
                if uid == cfg.observer_id:
                    continue
                if loss.dropped():
                    dropped += 1
                    continue

                sample = script.samples[index]
                update = MotionUpdate(
                    user_id=uid,
                    tick=tick,
                    head=sample.head,
                    left=sample.left,
                    right=sample.right,
                    left_trigger=sample.left_trigger,
                    right_trigger=sample.right_trigger,
                    event=event,
                )
                packet = encode_motion_update(update, self.registry, self.codec, sequence=sequence)
                self._deliver(env.now, MOTION_SOURCE_ID, packet.to_bytes())
                sent += 1

            if should_log_progress(tick + 1, n_ticks, interval=max(1, n_ticks // 4)):
                logger.info("Tick %s/%s: %s motion packets sent, %s dropped", tick + 1, n_ticks, sent, dropped)

    def _chatter(self, env: simpy.Environment, source: BackgroundSource, until: float) -> Generator[Any, Any, None]:
        rng = np.random.default_rng([self.cfg.seed, _BACKGROUND_STREAM + source.source_id])
        index = 0
        while index / source.rate < until:
            yield env.timeout(index / source.rate - env.now)
            raw = source.payload(index, rng)
            if not rng.random() < source.drop_rate:
                self._deliver(env.now, source.source_id, raw)
            index += 1

    def run(self, victims: Sequence[MotionScript], start_time: str = "", echo: Optional[dict[str, Any]] = None) -> TraceFile:
        cfg = self.cfg
        for script in victims:
            if not math.isclose(script.device_rate, cfg.device_rate):
                raise ValueError(
                    f"Script for user {script.user_id} is at {script.device_rate} Hz, room expects {cfg.device_rate} Hz"
                )
            if not script.samples:
                raise ValueError(f"Script for user {script.user_id} has no samples")
        user_ids = [v.user_id for v in victims]
        if len(user_ids) != len(set(user_ids)):
            raise ValueError(f"Duplicate victim user ids: {user_ids}")

        self._records = []
        self._last_recv_us = 0
        n_samples = max((len(v) for v in victims), default=0)
        n_ticks = tick_count(n_samples, cfg.device_rate, cfg.tick_rate)
        duration = n_ticks / cfg.tick_rate

        env = simpy.Environment()
        env.process(self._broadcast(env, victims, n_ticks))
        for source in self.background:
            env.process(self._chatter(env, source, duration))
        env.run()

        config = cfg.to_dict() | {"users": user_ids} | (echo or {})
        logger.info(
            "Session done: %s users, %s ticks, %s records (%s sources)",
            len(victims),
            n_ticks,
            len(self._records),
            1 + len(self.background),
        )
        return TraceFile(config=config, start_time=start_time, records=list(self._records))


def run_session(
    cfg: RoomConfig,
    victims: Sequence[MotionScript],
    background: Sequence[BackgroundSource],
    registry: CustomTypeRegistry,
    codec: QuantizedTransformCodec,
    start_time: str = "",
    echo: Optional[dict[str, Any]] = None,
) -> TraceFile:
    return RoomSimulator(cfg, registry, codec, background).run(victims, start_time, echo)


def session_echo(codec: QuantizedTransformCodec) -> dict[str, Any]:
    """Codec parameters recorded in the trace header next to the room config."""
    return {
        "codec_type": codec.spec.name,
        "position_min": list(codec.position_min),
        "position_max": list(codec.position_max),
        "trigger_bits": codec.trigger_bits,
    }
