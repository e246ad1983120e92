from __future__ import annotations

from dataclasses import dataclass

from .Transform import Transform, Vec3

COPLANARITY_TOLERANCE = 1e-7
MIN_AREA = 1e-8


@dataclass(frozen=True, slots=True)
class Ray:
    origin: Vec3
    direction: Vec3

    @classmethod
    def from_points(cls, origin: Vec3, toward: Vec3) -> Ray:
        return cls(origin, (toward - origin).normalized())

    @classmethod
    def from_transform(cls, pose: Transform) -> Ray:
        """Ray along the pose's forward (-z) axis."""
        return cls(pose.position, pose.forward().normalized())

    def at(self, distance: float) -> Vec3:
        return self.origin + self.direction * distance


@dataclass(frozen=True, slots=True)
class RayHit:
    point: Vec3
    distance: float


@dataclass(frozen=True, slots=True)
class Quad:
    """Planar convex quad with counterclockwise corners (seen from the normal side)."""

    corners: tuple[Vec3, Vec3, Vec3, Vec3]

    @classmethod
    def square(cls, center: Vec3, side: float, u: Vec3, v: Vec3) -> Quad:
        """Axis-aligned square in the plane spanned by u (right) and v (up)."""
        h = side / 2.0
        return cls(
            (
                center - u * h - v * h,
                center + u * h - v * h,
                center + u * h + v * h,
                center - u * h + v * h,
            )
        )

    @property
    def center(self) -> Vec3:
        total = self.corners[0] + self.corners[1] + self.corners[2] + self.corners[3]
        return total * 0.25

    @property
    def normal(self) -> Vec3:
        c = self.corners
        return (c[2] - c[0]).cross(c[3] - c[1]).normalized()

    @property
    def area(self) -> float:
        c = self.corners
        return 0.5 * (c[2] - c[0]).cross(c[3] - c[1]).norm()

    def coplanarity_residual(self) -> float:
        n = self.normal
        origin = self.center
        return max(abs((p - origin).dot(n)) for p in self.corners)

    def is_valid(self) -> bool:
        return self.area > MIN_AREA and self.coplanarity_residual() < COPLANARITY_TOLERANCE

    def contains(self, point: Vec3, eps: float = 1e-12) -> bool:
        """True when an in-plane point lies inside the quad's edges."""
        n = self.normal
        for i in range(4):
            a = self.corners[i]
            b = self.corners[(i + 1) % 4]
            if (b - a).cross(point - a).dot(n) < -eps:
                return False
        return True

    def transformed(self, pose: Transform) -> Quad:
        c = self.corners
        return Quad((pose.apply(c[0]), pose.apply(c[1]), pose.apply(c[2]), pose.apply(c[3])))

    def max_corner_error(self, other: Quad) -> float:
        return max((a - b).norm() for a, b in zip(self.corners, other.corners))
