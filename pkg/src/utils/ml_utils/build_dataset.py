from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from ...classes.FieldSemanticsMap import FieldSemanticsMap, position_channel
from ...classes.KeyboardModel import KeyboardModel
from ...classes.KeystrokeAttack import DEFAULT_THRESHOLD, demux_users, filter_motion_source, parse_stream, trigger_crossings
from ...classes.MotionScript import TruthLabels
from ...classes.TraceFile import TraceFile
from ..errors import LengthMismatch
from ..eval_utils import press_interval
from ..logger import setup_logger

logger = setup_logger(__name__)

FEATURE_MODES = ("bytes", "bits")


@dataclass
class ByteDataset:
    """One row per detected click: the clicking hand's raw custom-object bytes and the key it pressed."""

    features: NDArray[np.float64]
    labels: NDArray[np.int64]
    hands: NDArray[np.str_]
    prompt_kinds: NDArray[np.str_]
    user_ids: NDArray[np.int64]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: NDArray[np.int64]) -> "ByteDataset":
        return ByteDataset(
            self.features[indices],
            self.labels[indices],
            self.hands[indices],
            self.prompt_kinds[indices],
            self.user_ids[indices],
        )

    def save(self, path: str | Path) -> None:
        np.savez_compressed(
            path,
            features=self.features,
            labels=self.labels,
            hands=self.hands,
            prompt_kinds=self.prompt_kinds,
            user_ids=self.user_ids,
        )

    @classmethod
    def load(cls, path: str | Path) -> "ByteDataset":
        with np.load(path) as data:
            return cls(
                data["features"],
                data["labels"],
                data["hands"],
                data["prompt_kinds"],
                data["user_ids"],
            )


def blob_features(blob: bytes, mode: str = "bytes") -> NDArray[np.float64]:
    raw = np.frombuffer(blob, dtype=np.uint8)
    if mode == "bytes":
        return raw.astype(np.float64) / 255.0
    if mode == "bits":
        return np.unpackbits(raw, bitorder="little").astype(np.float64)
    raise ValueError(f"Unknown feature mode {mode!r}; expected one of {FEATURE_MODES}")


def build_dataset(
    traces: Sequence[TraceFile],
    truths: Sequence[Mapping[int, TruthLabels]],
    sem: FieldSemanticsMap,
    kb: KeyboardModel,
    threshold: float = DEFAULT_THRESHOLD,
    features: str = "bytes",
) -> ByteDataset:
    """Label the clicking hand's opaque transform blob at every click packet.

    Packets are parsed without a registry; only the user, tick, trigger and
    hand-field locations from the semantics map are used.
    """
    if len(traces) != len(truths):
        raise ValueError(f"Got {len(traces)} traces but {len(truths)} truth sets")

    rows: list[NDArray[np.float64]] = []
    labels: list[int] = []
    hands: list[str] = []
    kinds: list[str] = []
    users: list[int] = []

    for trace, truth_by_user in zip(traces, truths):
        tick_rate = float(trace.config.get("tick_rate", 15.0))
        packets = parse_stream(filter_motion_source(trace))
        for uid, stream in demux_users(packets, sem).items():
            truth = truth_by_user.get(uid)
            if truth is None:
                raise LengthMismatch(f"Trace has user {uid} with no ground-truth labels")
            used = [False] * len(truth.labels)
            for index, crossed in trigger_crossings(stream, sem, threshold):
                packet = stream[index]
                tick = sem.tick(packet)
                if tick is None:
                    continue
                time = tick / tick_rate
                for hand in crossed:
                    match = None
                    for i, label in enumerate(truth.labels):
                        lo, hi = press_interval(label.start_index, label.end_index, truth.device_rate)
                        if not used[i] and label.hand == hand and lo <= time < hi:
                            match = i
                            break
                    if match is None:
                        raise LengthMismatch(f"User {uid}: click at tick {tick} ({hand}) matches no labelled press")
                    used[match] = True
                    value = packet.get(sem.location(position_channel(hand, "x")).field_id)
                    if value is None or not isinstance(value.value, bytes):
                        continue
                    label = truth.labels[match]
                    rows.append(blob_features(value.value, features))
                    labels.append(kb.index_of(label.key))
                    hands.append(str(hand))
                    kinds.append(label.prompt_kind)
                    users.append(uid)

    if not rows:
        raise LengthMismatch("No clicks found to build a dataset from")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise LengthMismatch(f"Click blobs differ in length: {sorted(lengths)}")
    logger.info("Built %s samples of %s %s features", len(rows), lengths.pop(), features)
    return ByteDataset(
        np.vstack(rows),
        np.array(labels, dtype=np.int64),
        np.array(hands),
        np.array(kinds),
        np.array(users, dtype=np.int64),
    )
