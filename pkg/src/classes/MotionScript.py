"""Device-rate motion recordings with click labels and sweep annotations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .KeyboardModel import label_to_char
from .MotionUpdate import EVENT_KEYBOARD_OPEN, Hand
from .Transform import Transform


@dataclass(frozen=True)
class MotionSample:
    head: Transform
    left: Transform
    right: Transform
    left_trigger: float = 0.0
    right_trigger: float = 0.0
    events: tuple[int, ...] = ()

    def hand(self, hand: Hand | str) -> Transform:
        return self.left if hand == Hand.LEFT else self.right

    def trigger(self, hand: Hand | str) -> float:
        return self.left_trigger if hand == Hand.LEFT else self.right_trigger

    @property
    def opens_keyboard(self) -> bool:
        return EVENT_KEYBOARD_OPEN in self.events


@dataclass(frozen=True)
class ClickLabel:
    """One intended keystroke: the press spans samples [start, end]; click is the first sample at or above threshold."""

    click_index: int
    key: str
    hand: Hand
    start_index: int
    end_index: int
    duration: float
    row: int
    prompt_index: int = 0
    prompt_kind: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "click_index": self.click_index,
            "key": self.key,
            "hand": str(self.hand),
            "start_index": self.start_index,
            "end_index": self.end_index,
            "duration": self.duration,
            "row": self.row,
            "prompt_index": self.prompt_index,
            "prompt_kind": self.prompt_kind,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ClickLabel:
        return cls(
            click_index=int(data["click_index"]),
            key=str(data["key"]),
            hand=Hand(data["hand"]),
            start_index=int(data["start_index"]),
            end_index=int(data["end_index"]),
            duration=float(data["duration"]),
            row=int(data["row"]),
            prompt_index=int(data.get("prompt_index", 0)),
            prompt_kind=str(data.get("prompt_kind", "")),
        )


@dataclass(frozen=True)
class Segment:
    """A sample range in which only `dimension` varies (None: everything held fixed)."""

    dimension: Optional[str]
    start_index: int
    end_index: int
    values: tuple[float, ...] = ()


@dataclass
class MotionScript:
    user_id: int
    device_rate: float
    samples: list[MotionSample] = field(default_factory=lambda: [])
    labels: list[ClickLabel] = field(default_factory=lambda: [])
    segments: list[Segment] = field(default_factory=lambda: [])
    prompts: list[str] = field(default_factory=lambda: [])

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.device_rate

    def time_of(self, index: int) -> float:
        return index / self.device_rate

    def typed_text(self) -> str:
        return "".join(label_to_char(label.key) for label in self.labels)

    def truth(self) -> TruthLabels:
        return TruthLabels(self.user_id, self.device_rate, list(self.labels), list(self.prompts))


@dataclass
class TruthLabels:
    """What a victim actually typed, without the motion; the scoring side of a session."""

    user_id: int
    device_rate: float
    labels: list[ClickLabel] = field(default_factory=lambda: [])
    prompts: list[str] = field(default_factory=lambda: [])

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "device_rate": self.device_rate,
            "prompts": self.prompts,
            "labels": [label.to_dict() for label in self.labels],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TruthLabels:
        return cls(
            user_id=int(data["user_id"]),
            device_rate=float(data["device_rate"]),
            labels=[ClickLabel.from_dict(d) for d in data["labels"]],
            prompts=[str(p) for p in data.get("prompts", [])],
        )


def save_truth(truths: Sequence[TruthLabels], path: str | Path) -> None:
    payload = {"users": [t.to_dict() for t in sorted(truths, key=lambda t: t.user_id)]}
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2))


def load_truth(path: str | Path) -> dict[int, TruthLabels]:
    data = json.loads(Path(path).read_text())
    truths = [TruthLabels.from_dict(entry) for entry in data["users"]]
    return {t.user_id: t for t in truths}
