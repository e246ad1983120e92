"""The 47-key virtual keyboard: layout asset, placement rule and key ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import pandas as pd

from ..utils.errors import UnmappableCharacter
from ..utils.geometry_utils import point_to_quad_plane_projection_distance, ray_plane_intersect, ray_quad_intersect
from ..utils.logger import setup_logger
from .Quad import Quad, Ray
from .Transform import RIGHT, UP, Transform, UnitQuat, Vec3, compose

logger = setup_logger(__name__)

KEY_COUNT = 47
KEY_SIDE = 0.03
SPACE_LABEL = "space"
DEFAULT_LAYOUT = Path(__file__).resolve().parents[2] / "assets" / "qwerty47.layout"

# Keyboard center 0.45 m ahead of and 0.25 m below the head, tilted to face it
DEFAULT_POSE_RULE = Transform(
    Vec3(0.0, -0.25, -0.45),
    UnitQuat.from_axis_angle(RIGHT, math.radians(-30.0)),
)


def player_pose(head: Transform) -> Transform:
    """Gravity-aligned pose: head position with heading only (pitch and roll removed)."""
    return Transform(head.position, UnitQuat.from_axis_angle(UP, head.rotation.yaw()))


def keyboard_pose(head: Transform, rule: Transform = DEFAULT_POSE_RULE) -> Transform:
    return compose(player_pose(head), rule)


def label_to_char(label: str) -> str:
    return " " if label == SPACE_LABEL else label


def char_to_label(ch: str) -> str:
    return SPACE_LABEL if ch == " " else ch


@dataclass(frozen=True)
class Key:
    label: str
    row: int
    quad: Quad

    @property
    def center(self) -> Vec3:
        return self.quad.center

    @property
    def char(self) -> str:
        return label_to_char(self.label)


@dataclass(frozen=True)
class RankedKey:
    label: str
    distance: float
    hit: bool = False


class KeyboardModel:
    """Keys in the keyboard frame (x right, y away from the player, +z normal toward the player)."""

    def __init__(self, keys: list[Key], pose_rule: Transform = DEFAULT_POSE_RULE) -> None:
        labels = [k.label for k in keys]
        if len(set(labels)) != len(labels):
            raise ValueError(f"Duplicate key labels in layout: {sorted({x for x in labels if labels.count(x) > 1})}")
        self.keys = keys
        self.pose_rule = pose_rule
        self._by_label = {k.label: k for k in keys}
        self._index = {k.label: i for i, k in enumerate(keys)}

    @classmethod
    def from_layout(cls, path: str | Path = DEFAULT_LAYOUT, pose_rule: Transform = DEFAULT_POSE_RULE) -> KeyboardModel:
        df = pd.read_csv(path, dtype={"label": str}, keep_default_na=False)
        missing = {"label", "row", "x", "y"} - set(df.columns)
        if missing:
            raise ValueError(f"Layout {path} lacks columns: {sorted(missing)}")

        keys = [
            Key(
                label=str(row.label),
                row=int(row.row),
                quad=Quad.square(Vec3(float(row.x), float(row.y), 0.0), KEY_SIDE, RIGHT, UP),
            )
            for row in df.itertuples(index=False)
        ]
        if len(keys) != KEY_COUNT:
            raise ValueError(f"Layout {path} has {len(keys)} keys, expected {KEY_COUNT}")
        logger.info("Loaded %s-key layout from %s", len(keys), path)
        return cls(keys, pose_rule)

    def with_pose_rule(self, pose_rule: Transform) -> KeyboardModel:
        return KeyboardModel(self.keys, pose_rule)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def labels(self) -> list[str]:
        return [k.label for k in self.keys]

    def key(self, label: str) -> Key:
        try:
            return self._by_label[label]
        except KeyError:
            raise UnmappableCharacter(f"No key labelled {label!r}") from None

    def key_for_char(self, ch: str) -> Key:
        label = char_to_label(ch)
        if label not in self._by_label:
            raise UnmappableCharacter(f"Character {ch!r} has no key on this layout")
        return self._by_label[label]

    def check_text(self, text: str) -> None:
        bad = sorted({ch for ch in text if char_to_label(ch) not in self._by_label})
        if bad:
            raise UnmappableCharacter(f"Characters {bad} have no key on this layout")

    def index_of(self, label: str) -> int:
        return self._index[label]

    def rows(self) -> dict[int, list[str]]:
        grouped: dict[int, list[str]] = {}
        for k in self.keys:
            grouped.setdefault(k.row, []).append(k.label)
        return dict(sorted(grouped.items()))

    def place(self, head: Transform) -> PlacedKeyboard:
        """Put the keyboard where it opens for a player whose head is at `head`."""
        return self.place_at(keyboard_pose(head, self.pose_rule))

    def place_at(self, pose: Transform) -> PlacedKeyboard:
        return PlacedKeyboard(pose, {k.label: k.quad.transformed(pose) for k in self.keys})


class PlacedKeyboard:
    """Key quads in world space for one keyboard-open."""

    def __init__(self, pose: Transform, quads: dict[str, Quad]) -> None:
        self.pose = pose
        self.quads = quads
        first = next(iter(quads.values()))
        self.plane_point = first.corners[0]
        self.plane_normal = first.normal

    def hit_key(self, ray: Ray) -> Optional[str]:
        for label, quad in self.quads.items():
            if ray_quad_intersect(ray, quad) is not None:
                return label
        return None

    def aim_point(self, ray: Ray) -> Optional[Vec3]:
        hit = ray_plane_intersect(ray, self.plane_point, self.plane_normal)
        return None if hit is None else hit.point

    def rank(self, ray: Ray) -> list[RankedKey]:
        """All keys by in-plane distance from the ray's keyboard-plane point; a direct hit ranks first."""
        point = self.aim_point(ray)
        if point is None:
            return []
        hit = self.hit_key(ray)
        ranked = [
            RankedKey(label, point_to_quad_plane_projection_distance(point, quad, quad.center), label == hit)
            for label, quad in self.quads.items()
        ]
        ranked.sort(key=lambda r: (not r.hit, r.distance, r.label))
        return ranked
