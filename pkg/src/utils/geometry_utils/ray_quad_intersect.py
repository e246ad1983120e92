from typing import Optional

from ...classes.Quad import Quad, Ray, RayHit
from ...classes.Transform import Vec3

PARALLEL_EPS = 1e-12


def ray_plane_intersect(ray: Ray, plane_point: Vec3, plane_normal: Vec3) -> Optional[RayHit]:
    """Intersect a ray with an infinite plane; empty when parallel or behind the origin."""
    denom = plane_normal.dot(ray.direction)
    if abs(denom) < PARALLEL_EPS:
        return None
    distance = plane_normal.dot(plane_point - ray.origin) / denom
    if distance <= 0.0:
        return None
    return RayHit(point=ray.at(distance), distance=distance)


def ray_quad_intersect(ray: Ray, quad: Quad) -> Optional[RayHit]:
    """Return where the ray crosses the quad, or None on a miss."""
    hit = ray_plane_intersect(ray, quad.corners[0], quad.normal)
    if hit is None or not quad.contains(hit.point):
        return None
    return hit
