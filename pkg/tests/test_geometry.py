"""Projection equation and pose algebra.

Oracles used here are independent of the library code paths:
quaternion rotation is cross-checked with an explicit Hamilton
sandwich product, and the pose map with a hand-built 3x3 matrix.
"""

import math

import numpy as np
import pytest

from uvpose.errors import DepthNonPositive, NonUnitQuaternion
from uvpose.geometry import (
    CameraIntrinsics,
    CamPoint,
    ModelPoint,
    PixelSample,
    Pose,
    Rotation,
    backproject,
    backproject_uvd,
    pose_compose,
    pose_inverse,
    project,
    project_xyz,
    quat_to_matrix,
    rotation_geodesic,
    transform_point,
)


def _sandwich_rotate(q, v):
    """Oracle: rotate v by unit quaternion q via q * (0, v) * conj(q)."""

    def hprod(a, b):
        w1, x1, y1, z1 = a
        w2, x2, y2, z2 = b
        return (
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    w, x, y, z = q
    conj = (w, -x, -y, -z)
    out = hprod(hprod(q, (0.0, v[0], v[1], v[2])), conj)
    return np.array(out[1:])


def _random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return Rotation(*q)


class TestCameraIntrinsics:
    def test_rejects_nonpositive_focal(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(0.0, 500.0, 320.0, 240.0, 640, 480)

    def test_rejects_empty_extent(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 0, 480)

    def test_matrix_layout(self):
        K = CameraIntrinsics(500.0, 600.0, 320.0, 240.0, 640, 480)
        np.testing.assert_array_equal(
            K.matrix(), [[500, 0, 320], [0, 600, 240], [0, 0, 1]]
        )

    def test_json_round_trip(self):
        K = CameraIntrinsics(525.0, 525.0, 319.5, 239.5, 640, 480)
        assert CameraIntrinsics.from_json_dict(K.to_json_dict()) == K


class TestTransformPoint:
    def test_identity_pose(self):
        out = transform_point(Pose.identity(), ModelPoint(0.1, 0.2, 0.3))
        np.testing.assert_allclose(out, (0.1, 0.2, 0.3), atol=1e-15)

    def test_quarter_turn_about_z(self):
        pose = Pose(Rotation.from_axis_angle((0, 0, 1), math.pi / 2), np.zeros(3))
        out = transform_point(pose, ModelPoint(1.0, 0.0, 0.0))
        np.testing.assert_allclose(out, (0.0, 1.0, 0.0), atol=1e-12)

    def test_matches_matrix_oracle(self):
        # Oracle: matrix built element-by-element from the quaternion,
        # then a plain matmul plus translation.
        rng = np.random.default_rng(42)
        for _ in range(200):
            r = _random_rotation(rng)
            t = rng.uniform(-2, 2, size=3)
            p = rng.uniform(-1, 1, size=3)
            w, x, y, z = r.w, r.x, r.y, r.z
            m = np.array(
                [
                    [1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * z * w, 2 * x * z + 2 * y * w],
                    [2 * x * y + 2 * z * w, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * x * w],
                    [2 * x * z - 2 * y * w, 2 * y * z + 2 * x * w, 1 - 2 * x * x - 2 * y * y],
                ]
            )
            expected = m @ p + t
            got = transform_point(Pose(r, t), ModelPoint(*p))
            np.testing.assert_allclose(got, expected, atol=1e-12)


class TestProjectBackproject:
    def test_principal_point(self):
        K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
        assert project(K, CamPoint(0, 0, 1)) == PixelSample(320.0, 240.0, 1)

    def test_linear_in_x(self):
        # 500 * 0.1 / 1 = 50 pixels right of the principal point.
        K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
        s = project(K, CamPoint(0.1, 0, 1))
        assert s.u == pytest.approx(370.0)
        assert s.v == pytest.approx(240.0)
        assert s.d == 1

    def test_backproject_principal_point(self):
        K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
        assert backproject(K, PixelSample(320, 240, 2)) == CamPoint(0.0, 0.0, 2)

    def test_backproject_offset(self):
        # (420 - 320) / 500 * 1 = 0.2
        K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
        cp = backproject(K, PixelSample(420, 240, 1))
        np.testing.assert_allclose(cp, (0.2, 0.0, 1.0), atol=1e-15)

    def test_rejects_nonpositive_depth(self):
        K = CameraIntrinsics(500, 500, 320, 240, 640, 480)
        with pytest.raises(DepthNonPositive):
            project(K, CamPoint(0.1, 0.1, 0.0))
        with pytest.raises(DepthNonPositive):
            backproject(K, PixelSample(10, 10, -1.0))

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            K = CameraIntrinsics(
                fx=rng.uniform(100, 2000),
                fy=rng.uniform(100, 2000),
                cx=rng.uniform(0, 1000),
                cy=rng.uniform(0, 1000),
                width=640,
                height=480,
            )
            cp = CamPoint(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.05, 10))
            back = backproject(K, project(K, cp))
            np.testing.assert_allclose(back, cp, rtol=1e-9)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(11)
        K = CameraIntrinsics(525, 525, 319.5, 239.5, 640, 480)
        xyz = np.column_stack(
            [rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50), rng.uniform(0.1, 5, 50)]
        )
        uvd = project_xyz(K, xyz)
        for i in range(50):
            np.testing.assert_allclose(uvd[i], project(K, CamPoint(*xyz[i])), rtol=1e-15)
        np.testing.assert_allclose(backproject_uvd(K, uvd), xyz, rtol=1e-12)

    def test_eq1_consistency(self):
        # project(transform_point(...)) must equal the direct evaluation
        # u = fx*(R.p + T).x / (R.p + T).z + cx computed with raw numpy.
        rng = np.random.default_rng(3)
        K = CameraIntrinsics(600, 550, 310, 250, 640, 480)
        for _ in range(200):
            r = _random_rotation(rng)
            t = rng.uniform(-0.5, 0.5, size=3) + np.array([0, 0, 2.0])
            p = rng.uniform(-0.2, 0.2, size=3)
            cam = r.matrix() @ p + t
            if cam[2] <= 0:
                continue
            expect_u = K.fx * cam[0] / cam[2] + K.cx
            expect_v = K.fy * cam[1] / cam[2] + K.cy
            got = project(K, transform_point(Pose(r, t), ModelPoint(*p)))
            np.testing.assert_allclose((got.u, got.v), (expect_u, expect_v), rtol=1e-9)


class TestRotation:
    def test_identity_matrix(self):
        np.testing.assert_array_equal(quat_to_matrix(Rotation(1, 0, 0, 0)), np.eye(3))

    def test_quarter_turn_matrix(self):
        c = math.cos(math.pi / 4)
        m = quat_to_matrix(Rotation(c, 0, 0, math.sin(math.pi / 4)))
        np.testing.assert_allclose(m, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)

    def test_matrix_matches_sandwich_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            r = _random_rotation(rng)
            v = rng.uniform(-1, 1, size=3)
            np.testing.assert_allclose(
                quat_to_matrix(r) @ v,
                _sandwich_rotate((r.w, r.x, r.y, r.z), v),
                atol=1e-12,
            )

    def test_matrix_is_special_orthogonal(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            m = _random_rotation(rng).matrix()
            np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-9)
            assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-9)

    def test_rejects_non_unit(self):
        with pytest.raises(NonUnitQuaternion):
            Rotation(1.0, 1.0, 0.0, 0.0)
        with pytest.raises(NonUnitQuaternion):
            quat_to_matrix((0.5, 0.5, 0.5, 0.7))

    def test_canonical_sign(self):
        r = Rotation(-1.0, 0.0, 0.0, 0.0)
        assert r.w == 1.0

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            r = _random_rotation(rng)
            rel = r.compose(r.inverse())
            # identity up to sign, within 1e-9
            assert abs(abs(rel.w) - 1.0) < 1e-9
            assert math.hypot(rel.x, rel.y, rel.z) < 1e-9

    def test_from_matrix_round_trip(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            r = _random_rotation(rng)
            back = Rotation.from_matrix(r.matrix())
            assert rotation_geodesic(r, back) < 1e-12

    def test_geodesic_small_angles(self):
        r = Rotation.from_axis_angle((0, 1, 0), 1e-7)
        assert rotation_geodesic(r, Rotation.identity()) == pytest.approx(1e-7, rel=1e-6)


class TestPose:
    def test_inverse_identity(self):
        inv = pose_inverse(Pose.identity())
        assert inv.rotation == Rotation.identity()
        np.testing.assert_array_equal(inv.translation, np.zeros(3))

    def test_inverse_pure_translation(self):
        inv = pose_inverse(Pose(Rotation.identity(), np.array([1.0, 2.0, 3.0])))
        np.testing.assert_allclose(inv.translation, [-1, -2, -3], atol=1e-15)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            pose = Pose(_random_rotation(rng), rng.uniform(-1, 1, size=3))
            p = rng.uniform(-1, 1, size=3)
            back = pose_inverse(pose).transform(pose.transform(p))
            np.testing.assert_allclose(back, p, atol=1e-12)

    def test_compose_matches_sequential(self):
        rng = np.random.default_rng(29)
        a = Pose(_random_rotation(rng), rng.uniform(-1, 1, 3))
        b = Pose(_random_rotation(rng), rng.uniform(-1, 1, 3))
        p = rng.uniform(-1, 1, 3)
        np.testing.assert_allclose(
            pose_compose(a, b).transform(p), a.transform(b.transform(p)), atol=1e-12
        )

    def test_rejects_non_finite_translation(self):
        with pytest.raises(ValueError):
            Pose(Rotation.identity(), np.array([0.0, np.nan, 0.0]))

    def test_json_round_trip(self):
        pose = Pose(Rotation.from_axis_angle((1, 2, 2), 0.7), np.array([0.1, -0.2, 0.9]))
        back = Pose.from_json_dict(pose.to_json_dict())
        assert rotation_geodesic(pose.rotation, back.rotation) < 1e-15
        np.testing.assert_array_equal(back.translation, pose.translation)
