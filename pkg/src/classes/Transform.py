"""Vectors, unit quaternions and rigid transforms.

Frame convention: right-handed, y up, meters. Local forward is -z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    @classmethod
    def zero(cls) -> Vec3:
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values: NDArray[np.float64] | list[float] | tuple[float, ...]) -> Vec3:
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, scale: float) -> Vec3:
        return Vec3(self.x * scale, self.y * scale, self.z * scale)

    def __rmul__(self, scale: float) -> Vec3:
        return self.__mul__(scale)

    def __neg__(self) -> Vec3:
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: Vec3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: Vec3) -> Vec3:
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> Vec3:
        n = self.norm()
        if n == 0.0:
            raise ValueError("Cannot normalize a zero-length vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in (self.x, self.y, self.z))


FORWARD = Vec3(0.0, 0.0, -1.0)
UP = Vec3(0.0, 1.0, 0.0)
RIGHT = Vec3(1.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class UnitQuat:
    w: float
    x: float
    y: float
    z: float

    @classmethod
    def identity(cls) -> UnitQuat:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis: Vec3, angle: float) -> UnitQuat:
        a = axis.normalized()
        s = math.sin(angle / 2.0)
        return cls(math.cos(angle / 2.0), a.x * s, a.y * s, a.z * s).normalized()

    @classmethod
    def from_two_vectors(cls, a: Vec3, b: Vec3) -> UnitQuat:
        """Shortest-arc rotation taking direction a onto direction b."""
        u = a.normalized()
        v = b.normalized()
        d = u.dot(v)
        if d < -1.0 + 1e-12:
            # Antiparallel: any axis perpendicular to u works
            axis = RIGHT.cross(u) if abs(u.x) < 0.9 else UP.cross(u)
            return cls.from_axis_angle(axis, math.pi)
        c = u.cross(v)
        return cls(1.0 + d, c.x, c.y, c.z).normalized()

    @classmethod
    def from_array(cls, values: NDArray[np.float64] | list[float]) -> UnitQuat:
        return cls(float(values[0]), float(values[1]), float(values[2]), float(values[3]))

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> UnitQuat:
        """Renormalize and canonicalize the sign so that w >= 0."""
        n = self.norm()
        if n == 0.0:
            raise ValueError("Cannot normalize a zero quaternion")
        sign = -1.0 if self.w < 0.0 else 1.0
        return UnitQuat(sign * self.w / n, sign * self.x / n, sign * self.y / n, sign * self.z / n)

    def conjugate(self) -> UnitQuat:
        return UnitQuat(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: UnitQuat) -> UnitQuat:
        return UnitQuat(
            self.w * other.w - self.x * other.x - self.y * other.y - self.z * other.z,
            self.w * other.x + self.x * other.w + self.y * other.z - self.z * other.y,
            self.w * other.y - self.x * other.z + self.y * other.w + self.z * other.x,
            self.w * other.z + self.x * other.y - self.y * other.x + self.z * other.w,
        )

    def rotate(self, v: Vec3) -> Vec3:
        q = Vec3(self.x, self.y, self.z)
        t = q.cross(v) * 2.0
        return v + t * self.w + q.cross(t)

    def angle_to(self, other: UnitQuat) -> float:
        """Rotation angle in radians between two orientations."""
        d = abs(self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z)
        return 2.0 * math.acos(min(1.0, d))

    def slerp(self, other: UnitQuat, t: float) -> UnitQuat:
        d = self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
        end = other
        if d < 0.0:
            d = -d
            end = UnitQuat(-other.w, -other.x, -other.y, -other.z)
        if d > 0.9995:
            mixed = UnitQuat(
                self.w + (end.w - self.w) * t,
                self.x + (end.x - self.x) * t,
                self.y + (end.y - self.y) * t,
                self.z + (end.z - self.z) * t,
            )
            return mixed.normalized()
        theta = math.acos(d)
        s0 = math.sin((1.0 - t) * theta) / math.sin(theta)
        s1 = math.sin(t * theta) / math.sin(theta)
        return UnitQuat(
            s0 * self.w + s1 * end.w,
            s0 * self.x + s1 * end.x,
            s0 * self.y + s1 * end.y,
            s0 * self.z + s1 * end.z,
        ).normalized()

    def yaw(self) -> float:
        """Heading angle about +y of this rotation's forward direction."""
        f = self.rotate(FORWARD)
        return math.atan2(-f.x, -f.z)


@dataclass(frozen=True, slots=True)
class Transform:
    position: Vec3
    rotation: UnitQuat

    @classmethod
    def identity(cls) -> Transform:
        return cls(Vec3.zero(), UnitQuat.identity())

    @classmethod
    def translate(cls, x: float, y: float, z: float) -> Transform:
        return cls(Vec3(x, y, z), UnitQuat.identity())

    def apply(self, point: Vec3) -> Vec3:
        """Map a point from this transform's local frame to the parent frame."""
        return self.rotation.rotate(point) + self.position

    def forward(self) -> Vec3:
        return self.rotation.rotate(FORWARD)

    def is_close(self, other: Transform, tol: float = 1e-7) -> bool:
        return (self.position - other.position).norm() <= tol and self.rotation.angle_to(
            other.rotation
        ) <= tol


def compose(a: Transform, b: Transform) -> Transform:
    """Transform that applies b first, then a."""
    return Transform(
        position=a.rotation.rotate(b.position) + a.position,
        rotation=(a.rotation * b.rotation).normalized(),
    )


def inverse(t: Transform) -> Transform:
    inv_rot = t.rotation.conjugate().normalized()
    return Transform(position=-inv_rot.rotate(t.position), rotation=inv_rot)
