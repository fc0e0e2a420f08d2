import numpy as np
import pytest

from motionkit.rotations import (
    HeadingFrame,
    InvalidRotationError,
    geodesic_angle,
    mat_to_quat,
    quat_from_axis_angle,
    quat_from_yaw,
    quat_mul,
    quat_rotate,
    quat_to_6d,
    quat_to_mat,
    rot6d_to_mat,
    rot6d_to_quat,
    wrap_angle,
    yaw_of_quat,
)

from conftest import random_quat


def test_identity_rotation_6d():
    assert np.allclose(quat_to_6d(np.array([1.0, 0, 0, 0])), [1, 0, 0, 0, 1, 0])


def test_yaw90_6d():
    q = quat_from_yaw(np.pi / 2)
    # columns of the 90 degree yaw matrix
    assert np.allclose(quat_to_6d(q), [0, 1, 0, -1, 0, 0], atol=1e-12)


def test_6d_round_trip_many():
    rng = np.random.default_rng(7)
    qs = random_quat(rng, 10_000)
    mats = quat_to_mat(qs)
    d6 = np.concatenate([mats[..., :, 0], mats[..., :, 1]], axis=-1)
    back = rot6d_to_mat(d6)
    assert np.max(np.abs(back - mats)) < 1e-12


def test_6d_degenerate_inputs():
    with pytest.raises(InvalidRotationError):
        rot6d_to_mat(np.zeros(6))
    with pytest.raises(InvalidRotationError):
        rot6d_to_mat(np.array([1.0, 0, 0, 2.0, 0, 0]))  # collinear columns


def test_mat_quat_round_trip():
    rng = np.random.default_rng(3)
    qs = random_quat(rng, 2000)
    back = mat_to_quat(quat_to_mat(qs))
    # same rotation up to sign
    dots = np.abs(np.sum(back * qs, axis=-1))
    assert np.max(np.abs(dots - 1.0)) < 1e-12


def test_quat_rotate_matches_matrix():
    rng = np.random.default_rng(11)
    q = random_quat(rng)
    v = rng.normal(size=(50, 3))
    assert np.allclose(quat_rotate(q, v), v @ quat_to_mat(q).T, atol=1e-12)


def test_geodesic_angle_known():
    qa = quat_from_yaw(0.0)
    qb = quat_from_yaw(1.2)
    assert np.isclose(geodesic_angle(qa, qb), 1.2, atol=1e-12)
    axis = np.array([1.0, 1.0, 0.0])
    qc = quat_from_axis_angle(axis, 0.7)
    assert np.isclose(geodesic_angle(np.array([1.0, 0, 0, 0]), qc), 0.7, atol=1e-12)


def test_yaw_extraction_ignores_roll_pitch():
    q = quat_mul(quat_from_yaw(0.8), quat_from_axis_angle((1, 0, 0), 0.3))
    assert np.isclose(yaw_of_quat(q), 0.8, atol=1e-12)


def test_wrap_angle():
    assert np.isclose(wrap_angle(np.pi), np.pi)
    assert np.isclose(wrap_angle(-np.pi), np.pi)
    assert np.isclose(wrap_angle(3.2), 3.2 - 2 * np.pi)
    assert np.isclose(wrap_angle(-3.2), -3.2 + 2 * np.pi)


class TestHeadingFrame:
    def test_identity(self):
        hf = HeadingFrame(np.zeros(3), np.array([1.0, 0, 0, 0]))
        v = np.array([1.0, 2.0, 3.0])
        assert np.allclose(hf.to_local_pos(v), v)

    def test_yaw90_sends_x_to_minus_y(self):
        hf = HeadingFrame(np.zeros(3), quat_from_yaw(np.pi / 2))
        local = hf.to_local_vec(np.array([1.0, 0.0, 0.0]))
        assert np.allclose(local, [0.0, -1.0, 0.0], atol=1e-12)

    def test_round_trip_random_frames(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(1000):
            hf = HeadingFrame(rng.normal(size=3), random_quat(rng))
            p = rng.normal(size=3)
            worst = max(worst, float(np.max(np.abs(hf.to_world_pos(hf.to_local_pos(p)) - p))))
            q = random_quat(rng)
            back = hf.to_world_quat(hf.to_local_quat(q))
            worst = max(worst, float(np.max(np.abs(back - q))))
        assert worst < 1e-9

    def test_degenerate_quaternion_rejected(self):
        with pytest.raises(InvalidRotationError):
            HeadingFrame(np.zeros(3), np.array([1e-8, 0, 0, 0]))

    def test_ignores_roll_pitch(self):
        tilted = quat_mul(quat_from_yaw(1.0), quat_from_axis_angle((0, 1, 0), 0.4))
        hf_tilted = HeadingFrame(np.zeros(3), tilted)
        hf_flat = HeadingFrame(np.zeros(3), quat_from_yaw(1.0))
        v = np.array([0.3, -0.2, 0.9])
        assert np.allclose(hf_tilted.to_local_vec(v), hf_flat.to_local_vec(v), atol=1e-12)
