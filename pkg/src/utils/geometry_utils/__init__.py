from .plane_distance import point_to_quad_plane_projection_distance, project_onto_plane
from .ray_quad_intersect import ray_plane_intersect, ray_quad_intersect
from .rigid_fit import RigidFit, fit_rigid_transform

__all__ = [
    "RigidFit",
    "fit_rigid_transform",
    "point_to_quad_plane_projection_distance",
    "project_onto_plane",
    "ray_plane_intersect",
    "ray_quad_intersect",
]
