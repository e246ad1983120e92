import math

import numpy as np
import pytest

from src.classes.CursorOffset import CursorOffset
from src.classes.Quad import Quad, Ray
from src.classes.Transform import FORWARD, RIGHT, UP, Transform, UnitQuat, Vec3, compose, inverse
from src.utils.geometry_utils import (
    fit_rigid_transform,
    point_to_quad_plane_projection_distance,
    ray_plane_intersect,
    ray_quad_intersect,
)

KEY = Quad.square(Vec3(0.0, 0.0, -1.0), 0.03, RIGHT, UP)


def _close(a: Vec3, b: Vec3, tol: float = 1e-9) -> bool:
    return (a - b).norm() <= tol


class TestTransform:
    def test_compose_with_identity_is_noop(self) -> None:
        t = Transform(Vec3(1.0, 2.0, 3.0), UnitQuat.from_axis_angle(UP, 0.7))
        assert compose(t, Transform.identity()).is_close(t, 1e-6)
        assert compose(Transform.identity(), t).is_close(t, 1e-6)

    def test_inverse_cancels(self) -> None:
        t = Transform(Vec3(0.3, -1.0, 2.5), UnitQuat.from_axis_angle(Vec3(1.0, 1.0, 0.0), 1.1))
        assert compose(t, inverse(t)).is_close(Transform.identity(), 1e-6)
        assert compose(inverse(t), t).is_close(Transform.identity(), 1e-6)

    def test_translations_add(self) -> None:
        combined = compose(Transform.translate(1.0, 0.0, 0.0), Transform.translate(0.0, 2.0, 0.0))
        assert combined.is_close(Transform.translate(1.0, 2.0, 0.0), 1e-6)

    def test_compose_applies_right_operand_first(self) -> None:
        turn = Transform(Vec3.zero(), UnitQuat.from_axis_angle(UP, math.pi / 2))
        step = Transform.translate(0.0, 0.0, -1.0)
        # stepping forward after a left quarter turn about +y ends at -x
        assert _close(compose(turn, step).position, Vec3(-1.0, 0.0, 0.0))

    def test_forward_is_minus_z(self) -> None:
        assert _close(Transform.identity().forward(), FORWARD)

    def test_normalized_keeps_w_non_negative(self) -> None:
        q = UnitQuat(-0.5, 0.5, 0.5, 0.5).normalized()
        assert q.w >= 0.0
        assert q.angle_to(UnitQuat(0.5, -0.5, -0.5, -0.5)) < 1e-6

    def test_yaw_of_heading(self) -> None:
        q = UnitQuat.from_axis_angle(UP, math.radians(30.0)) * UnitQuat.from_axis_angle(RIGHT, math.radians(-20.0))
        assert q.yaw() == pytest.approx(math.radians(30.0))


def _random_transforms(count: int, seed: int) -> list[Transform]:
    rng = np.random.default_rng(seed)
    positions = rng.uniform(-10.0, 10.0, size=(count, 3))
    rotations = rng.normal(size=(count, 4))
    return [Transform(Vec3.from_array(p), UnitQuat.from_array(q).normalized()) for p, q in zip(positions, rotations)]


class TestTransformLaws:
    @pytest.fixture(scope="class")
    def triples(self) -> list[tuple[Transform, Transform, Transform]]:
        a, b, c = (_random_transforms(1000, seed) for seed in (11, 12, 13))
        return list(zip(a, b, c))

    def test_identity_and_inverse(self, triples: list[tuple[Transform, Transform, Transform]]) -> None:
        for t, _, _ in triples:
            assert compose(t, Transform.identity()).is_close(t, 1e-6)
            assert compose(Transform.identity(), t).is_close(t, 1e-6)
            assert compose(t, inverse(t)).is_close(Transform.identity(), 1e-6)
            assert compose(inverse(t), t).is_close(Transform.identity(), 1e-6)

    def test_associativity(self, triples: list[tuple[Transform, Transform, Transform]]) -> None:
        for a, b, c in triples:
            assert compose(compose(a, b), c).is_close(compose(a, compose(b, c)), 1e-6)

    def test_compose_matches_nested_apply(self, triples: list[tuple[Transform, Transform, Transform]]) -> None:
        for a, b, c in triples:
            point = c.position
            assert _close(compose(a, b).apply(point), a.apply(b.apply(point)), 1e-9)

    def test_rotation_keeps_length(self, triples: list[tuple[Transform, Transform, Transform]]) -> None:
        for a, b, _ in triples:
            assert a.rotation.rotate(b.position).norm() == pytest.approx(b.position.norm(), rel=1e-12)


class TestRayQuad:
    def test_hit_at_center(self) -> None:
        hit = ray_quad_intersect(Ray(Vec3.zero(), FORWARD), KEY)
        assert hit is not None
        assert hit.distance == pytest.approx(1.0)
        assert _close(hit.point, Vec3(0.0, 0.0, -1.0))

    def test_miss_outside_edges(self) -> None:
        ray = Ray.from_points(Vec3.zero(), Vec3(0.016, 0.0, -1.0))
        assert ray_quad_intersect(ray, KEY) is None

    def test_parallel_ray_misses(self) -> None:
        assert ray_quad_intersect(Ray(Vec3(0.0, 0.0, -1.0), RIGHT), KEY) is None

    def test_plane_behind_origin_misses(self) -> None:
        assert ray_plane_intersect(Ray(Vec3.zero(), -FORWARD), KEY.corners[0], KEY.normal) is None

    def test_quad_properties(self) -> None:
        assert KEY.area == pytest.approx(0.0009)
        assert KEY.is_valid()
        assert _close(KEY.center, Vec3(0.0, 0.0, -1.0))


class TestProjectionDistance:
    @pytest.mark.parametrize(
        ("point", "expected"),
        [
            (Vec3(0.0, 0.0, -1.0), 0.0),
            (Vec3(0.032, 0.0, -1.0), 0.032),
            (Vec3(0.0, 0.016, -1.0), 0.016),
            # off-plane offsets along the normal do not count
            (Vec3(0.0, 0.016, -0.8), 0.016),
        ],
    )
    def test_in_plane_distance(self, point: Vec3, expected: float) -> None:
        assert point_to_quad_plane_projection_distance(point, KEY, KEY.center) == pytest.approx(expected, abs=1e-12)


class TestRigidFit:
    def test_recovers_known_transform(self) -> None:
        truth = Transform(Vec3(0.4, -0.2, 1.3), UnitQuat.from_axis_angle(Vec3(0.2, 1.0, -0.4), 0.9))
        rng = np.random.default_rng(3)
        source = rng.uniform(-1.0, 1.0, size=(20, 3))
        target = np.array([truth.apply(Vec3.from_array(p)).as_tuple() for p in source])

        fit = fit_rigid_transform(source, target)

        assert fit.transform.is_close(truth, 1e-6)
        assert fit.rms_residual < 1e-9

    def test_shape_mismatch_rejected(self) -> None:
        with pytest.raises(ValueError):
            fit_rigid_transform(np.zeros((4, 3)), np.zeros((5, 3)))


class TestCursorOffset:
    def test_identity_ray_is_hand_forward(self) -> None:
        ray = CursorOffset.identity().ray(Transform.translate(1.0, 1.0, 1.0))
        assert _close(ray.origin, Vec3(1.0, 1.0, 1.0))
        assert _close(ray.direction, FORWARD)

    def test_canonical_keeps_line(self) -> None:
        offset = CursorOffset.from_yaw(7.0, 0.02, -0.01, 0.11)
        canonical = offset.canonical()
        assert offset.direction_error(canonical) < 1e-6
        # origin moves along the pointing axis to the foot of the perpendicular from the hand
        assert abs(canonical.transform.position.dot(canonical.forward)) < 1e-12
        along = canonical.transform.position - offset.transform.position
        assert along.cross(offset.forward).norm() < 1e-12

    def test_errors_against_self(self) -> None:
        offset = CursorOffset.from_yaw(-12.0, 0.0, 0.03, 0.05)
        assert offset.direction_error(offset) == pytest.approx(0.0, abs=1e-6)
        assert offset.position_error(offset) == pytest.approx(0.0, abs=1e-12)

    def test_dict_roundtrip(self) -> None:
        offset = CursorOffset.from_yaw(7.0, 0.02, -0.01, 0.11)
        assert CursorOffset.from_dict(offset.to_dict()).transform.is_close(offset.transform, 1e-6)
