import math

import numpy as np
import pytest

from groupsense.errors import DegenerateNormalError, InsufficientKeypointsError
from groupsense.orientation import (
    center_keypoints,
    covariance,
    disambiguate_facing,
    eigendecompose_sym3,
    eigendecompose_sym3_batch,
    eigendecompose_sym3_scalar,
    estimate_person_state,
    facing_angle,
    fit_body_plane,
    plane_normals_batch,
)
from groupsense.skeleton import LEFT_SHOULDER, RIGHT_SHOULDER, Keypoint3D

from conftest import make_person_keypoints

CAMERA_AXIS = (0.0, 0.0, 1.0)


def wrap_diff(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


class TestCenterKeypoints:
    def test_already_centered(self):
        pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)
        centered, mean = center_keypoints(pts)
        np.testing.assert_allclose(mean, [0, 0, 0])
        np.testing.assert_allclose(centered, pts)

    def test_identical_points(self):
        pts = np.tile([2.0, 3.0, 4.0], (5, 1))
        centered, mean = center_keypoints(pts)
        np.testing.assert_allclose(mean, [2, 3, 4])
        np.testing.assert_allclose(centered, 0.0)

    def test_column_sums_vanish(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(10, 3)) * 5
        centered, _ = center_keypoints(pts)
        np.testing.assert_allclose(centered.sum(axis=0), 0.0, atol=1e-12 * 10)

    def test_too_few_points(self):
        with pytest.raises(InsufficientKeypointsError):
            center_keypoints(np.zeros((3, 3)))


class TestCovariance:
    def test_zeros(self):
        np.testing.assert_array_equal(covariance(np.zeros((5, 3))), np.zeros((3, 3)))

    def test_two_rows(self):
        m = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
        np.testing.assert_allclose(covariance(m), np.diag([1.0, 0, 0]))

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(1)
        m = rng.normal(size=(12, 3))
        m -= m.mean(axis=0)
        expected = np.zeros((3, 3))
        for row in m:
            for i in range(3):
                for j in range(3):
                    expected[i, j] += row[i] * row[j]
        expected /= m.shape[0]
        np.testing.assert_allclose(covariance(m), expected, atol=1e-14)

    def test_symmetric_psd(self):
        rng = np.random.default_rng(2)
        m = rng.normal(size=(9, 3))
        c = covariance(m - m.mean(axis=0))
        np.testing.assert_array_equal(c, c.T)
        assert np.all(np.linalg.eigvalsh(c) > -1e-12)


def reconstruct(values, vectors):
    return vectors @ np.diag(values) @ vectors.T


class TestEigendecomposeSym3:
    def test_identity(self):
        values, vectors = eigendecompose_sym3(np.eye(3))
        np.testing.assert_allclose(values, [1, 1, 1])
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(reconstruct(values, vectors), np.eye(3), atol=1e-12)

    def test_diagonal(self):
        values, vectors = eigendecompose_sym3(np.diag([3.0, 2.0, 1.0]))
        np.testing.assert_allclose(values, [3, 2, 1])
        np.testing.assert_allclose(np.abs(vectors), np.eye(3), atol=1e-12)

    def test_planar_point_set(self):
        rng = np.random.default_rng(3)
        pts = np.column_stack([rng.normal(size=30), rng.normal(size=30), np.zeros(30)])
        values, vectors = eigendecompose_sym3(covariance(pts - pts.mean(axis=0)))
        assert values[2] <= 1e-9
        np.testing.assert_allclose(np.abs(vectors[:, 2]), [0, 0, 1], atol=1e-7)

    def test_asymmetric_rejected(self):
        c = np.eye(3)
        c[0, 1] = 1e-3
        with pytest.raises(ValueError, match="symmetric"):
            eigendecompose_sym3(c)

    def test_matches_lapack_eigenvalues(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            a = rng.normal(size=(3, 3))
            c = (a + a.T) / 2
            values, vectors = eigendecompose_sym3(c)
            np.testing.assert_allclose(values, np.linalg.eigvalsh(c)[::-1], atol=1e-10)
            np.testing.assert_allclose(
                reconstruct(values, vectors), c, atol=1e-10 * max(1.0, np.abs(c).max())
            )

    def test_deterministic_signs(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(3, 3))
        c = (a + a.T) / 2
        v1 = eigendecompose_sym3(c)[1]
        v2 = eigendecompose_sym3(c.copy())[1]
        np.testing.assert_array_equal(v1, v2)

    def test_scalar_batch_equivalence(self):
        rng = np.random.default_rng(6)
        mats = rng.normal(size=(64, 3, 3))
        mats = (mats + mats.transpose(0, 2, 1)) / 2
        batch_values, batch_vectors = eigendecompose_sym3_batch(mats)
        for i in range(64):
            m = mats[i]
            values, vectors = eigendecompose_sym3_scalar(
                m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2]
            )
            np.testing.assert_allclose(batch_values[i], values, atol=1e-12)
            for col in range(3):
                np.testing.assert_allclose(
                    batch_vectors[i][:, col], vectors[col], atol=1e-9
                )

    def test_near_degenerate_falls_back_cleanly(self):
        # eigenvalue gap far below the closed-form threshold
        c = np.diag([2.0, 2.0 + 1e-9, 1.0])
        values, vectors = eigendecompose_sym3(c)
        np.testing.assert_allclose(reconstruct(values, vectors), c, atol=1e-12)
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(3), atol=1e-10)

    def test_plane_normals_batch_consistent(self):
        rng = np.random.default_rng(7)
        mats = rng.normal(size=(40, 3, 3))
        mats = (mats + mats.transpose(0, 2, 1)) / 2
        l1, l2, l3, v3x, v3y, v3z = plane_normals_batch(
            mats[:, 0, 0], mats[:, 0, 1], mats[:, 0, 2],
            mats[:, 1, 1], mats[:, 1, 2], mats[:, 2, 2],
        )
        values, vectors = eigendecompose_sym3_batch(mats)
        np.testing.assert_allclose(np.stack([l1, l2, l3], axis=1), values, atol=1e-12)
        for i in range(40):
            direction = np.array([v3x[i], v3y[i], v3z[i]])
            direction /= np.linalg.norm(direction)
            assert abs(abs(direction @ vectors[i][:, 2]) - 1.0) < 1e-8


class TestFitBodyPlane:
    def test_planar_body_normal(self):
        kps = make_person_keypoints(3.0, 0.0, math.pi)  # facing the camera
        plane = fit_body_plane(np.array([kp.camera_xyz for kp in kps]))
        assert plane.eigenvalues[0] >= plane.eigenvalues[1] >= plane.eigenvalues[2] >= 0
        assert plane.eigenvalues[2] <= 1e-12
        # body plane normal is horizontal and along the viewing axis
        normal = np.array(plane.normal)
        assert abs(abs(normal[2]) - 1.0) < 1e-9


class TestFacingAngle:
    def test_parallel(self):
        assert facing_angle((0, 0, 1), (0, 0, 1)) == 0.0

    def test_orthogonal(self):
        assert facing_angle((1, 0, 0), (0, 0, 1)) == pytest.approx(math.pi / 2)

    def test_forty_five(self):
        n = (1 / math.sqrt(2), 0, 1 / math.sqrt(2))
        assert facing_angle(n, (0, 0, 1)) == pytest.approx(math.pi / 4)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateNormalError):
            facing_angle((0, 0, 0), (0, 0, 1))


def shoulder(index, world_x, world_y):
    return Keypoint3D(index=index, camera_xyz=(world_y, 0.0, world_x), world_xy=(world_x, world_y))


class TestDisambiguateFacing:
    def test_no_flip_when_right_not_farther(self):
        left = shoulder(LEFT_SHOULDER, 3.0, 0.2)
        right = shoulder(RIGHT_SHOULDER, 3.0, -0.2)  # same ground x: facing the camera squarely
        assert disambiguate_facing(0.0, left, right) == 0.0

    def test_flip_when_right_farther(self):
        left = shoulder(LEFT_SHOULDER, 3.0, 0.2)
        right = shoulder(RIGHT_SHOULDER, 3.2, -0.2)
        assert disambiguate_facing(0.0, left, right) == pytest.approx(math.pi)

    def test_wrap_into_range(self):
        left = shoulder(LEFT_SHOULDER, 3.0, 0.2)
        right = shoulder(RIGHT_SHOULDER, 3.2, -0.2)
        got = disambiguate_facing(3 * math.pi / 2, left, right)
        assert got == pytest.approx(math.pi / 2)

    def test_missing_shoulder_returns_input(self):
        assert disambiguate_facing(1.0, None, shoulder(RIGHT_SHOULDER, 3, 0)) == 1.0


class TestEstimatePersonState:
    def conf(self, kps):
        return [1.0] * len(kps)

    def test_recovers_known_facing(self):
        for theta in (0.3, 1.2, math.pi, 4.0, 5.9, 0.0, math.pi / 2, 3 * math.pi / 2):
            kps = make_person_keypoints(3.0, 0.5, theta)
            state = estimate_person_state(kps, self.conf(kps), CAMERA_AXIS)
            assert wrap_diff(state.theta, theta % (2 * math.pi)) < 1e-9, theta
            assert state.position == pytest.approx((3.0, 0.5), abs=1e-12)
            assert state.n_valid == 17
            assert not state.shoulder_fallback

    def test_rotation_by_thirty_degrees(self):
        base = estimate_person_state(
            make_person_keypoints(3.0, 0.0, 2.0), [1.0] * 17, CAMERA_AXIS
        )
        rotated = estimate_person_state(
            make_person_keypoints(3.0, 0.0, 2.0 + math.pi / 6), [1.0] * 17, CAMERA_AXIS
        )
        assert wrap_diff(rotated.theta - base.theta, math.pi / 6) < 1e-6

    def test_collinear_keypoints_degenerate(self):
        kps = [
            Keypoint3D(index=i, camera_xyz=(0.0, 0.1 * i, 3.0), world_xy=(3.0, 0.0))
            for i in range(17)
        ]
        with pytest.raises(DegenerateNormalError):
            estimate_person_state(kps, [1.0] * 17, CAMERA_AXIS)

    def test_rotation_equivariance(self):
        # rotating the scene about the vertical axis shifts theta by the same angle
        rng = np.random.default_rng(8)
        for _ in range(40):
            theta = rng.uniform(0, 2 * math.pi)
            phi = rng.uniform(0, 2 * math.pi)
            if min(abs(math.sin(theta)), abs(math.sin(theta + phi))) < 1e-3:
                continue  # stay clear of the front/back comparison's blind axis
            kps = make_person_keypoints(3.0, 0.4, theta)
            cos_p, sin_p = math.cos(phi), math.sin(phi)
            rotated = []
            for kp in kps:
                gx, gy = kp.world_xy
                rx, ry = gx * cos_p - gy * sin_p, gx * sin_p + gy * cos_p
                rotated.append(
                    Keypoint3D(kp.index, (ry, kp.camera_xyz[1], rx), (rx, ry))
                )
            base = estimate_person_state(kps, [1.0] * 17, CAMERA_AXIS)
            moved = estimate_person_state(rotated, [1.0] * 17, CAMERA_AXIS)
            assert wrap_diff(moved.theta - base.theta, phi) < 1e-6

    def test_translation_invariance(self):
        kps = make_person_keypoints(3.0, 0.4, 2.2)
        base = estimate_person_state(kps, [1.0] * 17, CAMERA_AXIS)
        moved_kps = [
            Keypoint3D(
                kp.index,
                (kp.camera_xyz[0] - 2.0, kp.camera_xyz[1], kp.camera_xyz[2] + 5.0),
                (kp.world_xy[0] + 5.0, kp.world_xy[1] - 2.0),
            )
            for kp in kps
        ]
        moved = estimate_person_state(moved_kps, [1.0] * 17, CAMERA_AXIS)
        assert wrap_diff(moved.theta, base.theta) <= 1e-12

    def test_scale_invariance_of_eigenstructure(self):
        kps = make_person_keypoints(3.0, 0.0, 2.0)
        pts = np.array([kp.camera_xyz for kp in kps])
        centered = pts - pts.mean(axis=0)
        for k in (0.5, 2.0, 7.0):
            v0, e0 = eigendecompose_sym3(covariance(centered))
            v1, e1 = eigendecompose_sym3(covariance(k * centered))
            np.testing.assert_allclose(v1, k * k * v0, rtol=1e-9, atol=1e-12 * k * k * v0[0])
            for col in range(3):
                assert abs(abs(e0[:, col] @ e1[:, col]) - 1.0) < 1e-9

    def test_low_confidence_keypoints_ignored(self):
        kps = make_person_keypoints(3.0, 0.0, 2.5)
        conf = [1.0] * 17
        # corrupt three keypoints but mark them unreliable
        corrupted = list(kps)
        for i in (0, 9, 16):
            corrupted[i] = Keypoint3D(i, (9.9, 9.9, 9.9), (9.9, 9.9))
            conf[i] = 0.05
        state = estimate_person_state(corrupted, conf, CAMERA_AXIS)
        assert state.n_valid == 14
        assert wrap_diff(state.theta, 2.5) < 1e-9

    def test_missing_shoulder_flags_fallback(self):
        kps = make_person_keypoints(3.0, 0.0, 2.5)
        conf = [1.0] * 17
        conf[LEFT_SHOULDER] = 0.0
        state = estimate_person_state(kps, conf, CAMERA_AXIS)
        assert state.shoulder_fallback

    def test_orientation_confidence_in_unit_range(self):
        kps = make_person_keypoints(3.0, 0.0, 1.0)
        state = estimate_person_state(kps, [1.0] * 17, CAMERA_AXIS)
        assert 0.0 < state.orientation_confidence <= 1.0
