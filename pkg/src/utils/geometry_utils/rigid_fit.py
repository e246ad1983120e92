from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation

from ...classes.Transform import Transform, UnitQuat, Vec3


@dataclass(frozen=True)
class RigidFit:
    transform: Transform
    rms_residual: float
    max_residual: float


def fit_rigid_transform(source: NDArray[np.float64], target: NDArray[np.float64]) -> RigidFit:
    """Least-squares rigid transform T with target ≈ T(source) for (N, 3) point arrays."""
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise ValueError(f"Point sets must both be (N, 3); got {source.shape} and {target.shape}")

    src_mean = source.mean(axis=0)
    dst_mean = target.mean(axis=0)
    rotation, _ = Rotation.align_vectors(target - dst_mean, source - src_mean)
    x, y, z, w = rotation.as_quat()
    quat = UnitQuat(float(w), float(x), float(y), float(z)).normalized()
    translation = dst_mean - rotation.apply(src_mean)
    transform = Transform(Vec3.from_array(translation), quat)

    residuals = np.linalg.norm(rotation.apply(source) + translation - target, axis=1)
    return RigidFit(
        transform=transform,
        rms_residual=float(np.sqrt(np.mean(residuals**2))),
        max_residual=float(residuals.max()),
    )
