import numpy as np
import pytest
from hypothesis import given, strategies as st

from motionlab.transforms import (
    Pose,
    orientation_error,
    quat_from_axis_angle,
    quat_from_rpy,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
    rotation_vector,
)


def random_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def test_identity_pose():
    p = Pose.identity()
    assert np.allclose(p.position, 0)
    assert np.allclose(p.orientation, [1, 0, 0, 0])


def test_quaternion_normalized_on_construction():
    p = Pose(position=[0, 0, 0], orientation=[2, 0, 0, 0])
    assert abs(np.linalg.norm(p.orientation) - 1.0) < 1e-9


def test_zero_quaternion_rejected():
    with pytest.raises(ValueError):
        Pose(position=[0, 0, 0], orientation=[0, 0, 0, 0])


def test_compose_against_matrices():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = Pose(position=rng.normal(size=3), orientation=random_quat(rng))
        b = Pose(position=rng.normal(size=3), orientation=random_quat(rng))
        c = a.compose(b)
        Ra, Rb, Rc = a.rotation_matrix(), b.rotation_matrix(), c.rotation_matrix()
        assert np.allclose(Rc, Ra @ Rb, atol=1e-12)
        assert np.allclose(c.position, a.position + Ra @ b.position, atol=1e-12)


def test_inverse():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = Pose(position=rng.normal(size=3), orientation=random_quat(rng))
        ident = p.compose(p.inverse())
        assert np.allclose(ident.position, 0, atol=1e-12)
        assert abs(abs(ident.orientation[0]) - 1.0) < 1e-12


def test_apply_matches_matrix_single_and_batch():
    rng = np.random.default_rng(3)
    p = Pose(position=rng.normal(size=3), orientation=random_quat(rng))
    pts = rng.normal(size=(10, 3))
    expected = pts @ p.rotation_matrix().T + p.position
    assert np.allclose(p.apply(pts), expected, atol=1e-12)
    assert np.allclose(p.apply(pts[0]), expected[0], atol=1e-12)


def test_quat_rotate_matches_matrix():
    rng = np.random.default_rng(4)
    for _ in range(100):
        q = random_quat(rng)
        v = rng.normal(size=3)
        assert np.allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-12)


def test_rpy_convention():
    # URDF rpy is fixed-axis XYZ: R = Rz(yaw) Ry(pitch) Rx(roll)
    q = quat_from_rpy(0.0, np.pi / 2, 0.0)
    assert np.allclose(quat_rotate(q, [0, 0, 1]), [1, 0, 0], atol=1e-12)
    q = quat_from_rpy(0.0, 0.0, np.pi / 2)
    assert np.allclose(quat_rotate(q, [1, 0, 0]), [0, 1, 0], atol=1e-12)


def test_rotation_vector_roundtrip():
    rng = np.random.default_rng(5)
    for _ in range(100):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-np.pi + 1e-6, np.pi - 1e-6)
        rv = rotation_vector(quat_from_axis_angle(axis, angle))
        assert np.allclose(rv, axis * angle, atol=1e-9)


def test_rotation_vector_double_cover():
    # q and -q are the same rotation and must give the same rotation vector
    q = quat_from_axis_angle(np.array([0, 0, 1.0]), 1.2)
    assert np.allclose(rotation_vector(q), rotation_vector(-q), atol=1e-12)


def test_orientation_error_zero_for_equal():
    rng = np.random.default_rng(6)
    q = random_quat(rng)
    assert np.linalg.norm(orientation_error(q, q)) < 1e-9
    assert np.linalg.norm(orientation_error(q, -q)) < 1e-9


def test_orientation_error_magnitude():
    base = np.array([1.0, 0, 0, 0])
    q = quat_from_axis_angle(np.array([0, 1.0, 0]), 0.3)
    err = orientation_error(q, base)
    assert np.allclose(err, [0, 0.3, 0], atol=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_quat_multiply_norm_preserved(values):
    q = np.asarray(values)
    n = np.linalg.norm(q)
    if n < 1e-3:
        return
    q = q / n
    assert abs(np.linalg.norm(quat_multiply(q, q)) - 1.0) < 1e-9


def test_pose_dict_roundtrip():
    rng = np.random.default_rng(7)
    p = Pose(position=rng.normal(size=3), orientation=random_quat(rng))
    q = Pose.from_dict(p.to_dict())
    assert p.approx_equal(q, tol=1e-15)
