from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..utils.logger import setup_logger
from .CursorOffset import CursorOffset
from .FieldSemanticsMap import FieldSemanticsMap
from .Transform import Transform, UnitQuat, Vec3

logger = setup_logger(__name__)


def transform_to_dict(t: Transform) -> dict[str, list[float]]:
    return {"position": list(t.position.as_tuple()), "rotation": list(t.rotation.as_tuple())}


def transform_from_dict(data: dict[str, Any]) -> Transform:
    return Transform(Vec3.from_array(data["position"]), UnitQuat.from_array(data["rotation"]).normalized())


@dataclass
class CalibrationReport:
    """Everything the attack needs that calibration recovered, plus how well it fit."""

    semantics: FieldSemanticsMap
    cursor_offset: CursorOffset
    pose_rule: Transform
    residuals: dict[str, float] = field(default_factory=lambda: {})
    search: dict[str, Any] = field(default_factory=lambda: {})
    key_corners: dict[str, list[list[float]]] = field(default_factory=lambda: {})

    def to_dict(self) -> dict[str, Any]:
        return {
            "semantics": self.semantics.to_dict(),
            "cursor_offset": self.cursor_offset.to_dict(),
            "pose_rule": transform_to_dict(self.pose_rule),
            "residuals": self.residuals,
            "search": self.search,
            "key_corners": self.key_corners,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CalibrationReport:
        return cls(
            semantics=FieldSemanticsMap.from_dict(data["semantics"]),
            cursor_offset=CursorOffset.from_dict(data["cursor_offset"]),
            pose_rule=transform_from_dict(data["pose_rule"]),
            residuals=dict(data.get("residuals", {})),
            search=dict(data.get("search", {})),
            key_corners=dict(data.get("key_corners", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())
        logger.info("Wrote calibration report to %s (sha256 %s)", path, self.sha256()[:12])

    @classmethod
    def load(cls, path: str | Path) -> CalibrationReport:
        return cls.from_dict(json.loads(Path(path).read_text()))
