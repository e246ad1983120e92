from ...classes.Quad import Quad
from ...classes.Transform import Vec3


def project_onto_plane(point: Vec3, quad: Quad) -> Vec3:
    n = quad.normal
    return point - n * (point - quad.corners[0]).dot(n)


def point_to_quad_plane_projection_distance(point: Vec3, quad: Quad, center: Vec3) -> float:
    """In-plane Euclidean distance from a point (projected onto the quad's plane) to a key center."""
    return (project_onto_plane(point, quad) - project_onto_plane(center, quad)).norm()
