from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .Quad import Ray
from .Transform import FORWARD, UP, Transform, UnitQuat, Vec3, compose


@dataclass(frozen=True)
class CursorOffset:
    """Fixed transform from the hand frame to the cursor (pointer) frame."""

    transform: Transform

    @classmethod
    def identity(cls) -> CursorOffset:
        return cls(Transform.identity())

    @classmethod
    def from_yaw(cls, yaw_deg: float, x: float, y: float, z: float) -> CursorOffset:
        rotation = UnitQuat.from_axis_angle(UP, math.radians(yaw_deg))
        return cls(Transform(Vec3(x, y, z), rotation))

    def cursor_pose(self, hand: Transform) -> Transform:
        return compose(hand, self.transform)

    def ray(self, hand: Transform) -> Ray:
        return Ray.from_transform(self.cursor_pose(hand))

    @property
    def forward(self) -> Vec3:
        return self.transform.forward().normalized()

    def canonical(self) -> CursorOffset:
        """Same cursor line, without the parts no reticle test can observe.

        Roll about the pointing axis and the origin's position along it are both
        invisible; the origin becomes the point on the line closest to the hand.
        """
        f = self.forward
        p = self.transform.position
        foot = p - f * p.dot(f)
        return CursorOffset(Transform(foot, UnitQuat.from_two_vectors(FORWARD, f)))

    def direction_error(self, other: CursorOffset) -> float:
        """Angle in radians between the two pointing directions."""
        return math.acos(max(-1.0, min(1.0, self.forward.dot(other.forward))))

    def position_error(self, other: CursorOffset) -> float:
        a = self.canonical().transform.position
        b = other.canonical().transform.position
        return (a - b).norm()

    def to_dict(self) -> dict[str, Any]:
        return {
            "position": list(self.transform.position.as_tuple()),
            "rotation": list(self.transform.rotation.as_tuple()),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CursorOffset:
        return cls(
            Transform(
                Vec3.from_array(data["position"]),
                UnitQuat.from_array(data["rotation"]).normalized(),
            )
        )
