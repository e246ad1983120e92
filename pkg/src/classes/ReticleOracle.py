"""What the attacker sees while calibrating: the reticle on a test screen or on the open keyboard.

Both views are built from injected ground truth, but only expose 2D screen
coordinates. Calibration never reads the truth directly.
"""

from __future__ import annotations

from typing import Optional

from ..utils.geometry_utils import ray_plane_intersect
from .CursorOffset import CursorOffset
from .KeyboardModel import PlacedKeyboard
from .Transform import Transform, Vec3, compose, inverse

Point2 = tuple[float, float]

SCREEN_Z = -2.0


class ReticleOracle:
    """A wall screen at z = screen_z facing +z; the reticle is where the cursor ray meets it."""

    def __init__(
        self,
        truth_offset: CursorOffset,
        controller_to_hand: Transform = Transform.identity(),
        screen_z: float = SCREEN_Z,
    ) -> None:
        self._offset = truth_offset
        self._controller_to_hand = controller_to_hand
        self._screen_point = Vec3(0.0, 0.0, screen_z)
        self._screen_normal = Vec3(0.0, 0.0, 1.0)
        self.queries = 0

    def reticle(self, controller: Transform) -> Optional[Point2]:
        self.queries += 1
        hand = compose(controller, self._controller_to_hand)
        hit = ray_plane_intersect(self._offset.ray(hand), self._screen_point, self._screen_normal)
        if hit is None:
            return None
        return hit.point.x, hit.point.y


class KeyboardView:
    """The open keyboard as rendered: reticle and key-corner marks in the keyboard's own 2D surface coordinates."""

    def __init__(
        self,
        truth_offset: CursorOffset,
        placed: PlacedKeyboard,
        controller_to_hand: Transform = Transform.identity(),
    ) -> None:
        self._offset = truth_offset
        self._placed = placed
        self._to_surface = inverse(placed.pose)
        self._controller_to_hand = controller_to_hand
        self.queries = 0

    def _surface(self, world: Vec3) -> Point2:
        local = self._to_surface.apply(world)
        return local.x, local.y

    def reticle(self, controller: Transform) -> Optional[Point2]:
        self.queries += 1
        hand = compose(controller, self._controller_to_hand)
        hit = ray_plane_intersect(self._offset.ray(hand), self._placed.plane_point, self._placed.plane_normal)
        if hit is None:
            return None
        return self._surface(hit.point)

    def corner_marks(self) -> dict[str, tuple[Point2, Point2, Point2, Point2]]:
        marks: dict[str, tuple[Point2, Point2, Point2, Point2]] = {}
        for label, quad in self._placed.quads.items():
            a, b, c, d = (self._surface(corner) for corner in quad.corners)
            marks[label] = (a, b, c, d)
        return marks
