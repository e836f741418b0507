import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from mvreg.errors import AngleNearPi, NotSymmetric
from mvreg.geometry import (
    Pose,
    exp_se3,
    log_se3,
    quat_to_rotation,
    rotation_angle,
    rotation_to_quat,
    sorted_eigendecomposition,
    transform_point,
)

from .conftest import random_pose, twist_matrix


def test_exp_zero_is_identity():
    p = exp_se3(np.zeros(6))
    assert np.array_equal(p.rotation, np.eye(3))
    assert np.array_equal(p.translation, np.zeros(3))


def test_exp_quarter_turn_about_z():
    p = exp_se3([0, 0, math.pi / 2, 0, 0, 0])
    expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
    assert np.allclose(p.rotation, expected, atol=1e-15)
    assert np.allclose(p.translation, 0)


def test_exp_matches_matrix_exponential(rng):
    for _ in range(200):
        xi = rng.normal(size=6)
        ref = expm(twist_matrix(xi))
        assert np.allclose(exp_se3(xi).matrix(), ref, atol=1e-12)


def test_log_exp_round_trip_1000(rng):
    worst = 0.0
    for _ in range(1000):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0, math.pi - 1e-3)
        xi = np.concatenate([axis * angle, rng.uniform(-5, 5, 3)])
        worst = max(worst, np.abs(log_se3(exp_se3(xi)) - xi).max())
    assert worst < 1e-9


@pytest.mark.parametrize("angle", [0.0, 1e-12, 1e-8, 1e-5, 1e-3, 0.5, 2.0, 3.0, math.pi - 1e-3])
def test_round_trip_across_angle_branches(angle):
    axis = np.array([1.0, -2.0, 0.5])
    axis /= np.linalg.norm(axis)
    xi = np.concatenate([axis * angle, [0.3, -0.2, 1.1]])
    assert np.abs(log_se3(exp_se3(xi)) - xi).max() < 1e-9


def test_log_identity_is_zero():
    assert np.array_equal(log_se3(Pose.identity()), np.zeros(6))


def test_log_quarter_turn_with_translation():
    p = Pose(exp_se3([0, 0, math.pi / 2, 0, 0, 0]).rotation, [1.0, 2.0, 3.0])
    xi = log_se3(p)
    assert np.allclose(xi[:3], [0, 0, math.pi / 2], atol=1e-15)
    back = exp_se3(xi)
    assert np.allclose(back.translation, [1.0, 2.0, 3.0], atol=1e-12)


def test_log_near_pi_raises():
    p = exp_se3([math.pi - 1e-8, 0, 0, 0, 0, 0])
    with pytest.raises(AngleNearPi):
        log_se3(p)


def test_transform_point_examples():
    assert np.array_equal(transform_point(Pose.identity(), [1, 2, 3]), [1, 2, 3])
    assert np.array_equal(transform_point(Pose(np.eye(3), [0, 0, 1]), [0, 0, 0]), [0, 0, 1])
    rz = exp_se3([0, 0, math.pi / 2, 0, 0, 0])
    assert np.allclose(transform_point(rz, [1, 0, 0]), [0, 1, 0], atol=1e-12)


def test_group_axioms(rng):
    for _ in range(100):
        a, b, c = (random_pose(rng) for _ in range(3))
        assert np.allclose((a @ b @ c).matrix(), (a @ (b @ c)).matrix(), atol=1e-9)
        assert np.allclose((a @ a.inverse()).matrix(), np.eye(4), atol=1e-9)
        R = a.rotation
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(R) - 1) < 1e-9


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=6, max_size=6),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
)
def test_transform_preserves_distances(xi, x, y):
    p = exp_se3(np.array(xi))
    x, y = np.array(x), np.array(y)
    d0 = np.linalg.norm(x - y)
    d1 = np.linalg.norm(transform_point(p, x) - transform_point(p, y))
    assert abs(d1 - d0) <= 1e-12 * max(d0, 1.0) * 10


def test_eigendecomposition_diagonal():
    e = sorted_eigendecomposition(np.diag([1.0, 3.0, 2.0]))
    assert np.array_equal(e.eigenvalues, [3.0, 2.0, 1.0])
    # columns are e_y, e_z, e_x up to sign
    assert np.array_equal(np.abs(e.rotation_basis), [[0, 0, 1], [1, 0, 0], [0, 1, 0]])
    e = sorted_eigendecomposition(np.diag([3.0, 2.0, 1.0]))
    assert np.allclose(e.rotation_basis, np.eye(3))
    assert np.array_equal(e.eigenvalues, [3.0, 2.0, 1.0])


def test_eigendecomposition_identity_degenerate():
    e = sorted_eigendecomposition(np.eye(3))
    assert np.allclose(e.eigenvalues, 1.0)
    V = e.rotation_basis
    assert np.allclose(V @ np.diag(e.eigenvalues) @ V.T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(V) - 1) < 1e-9


def test_eigendecomposition_random_psd_1000(rng):
    for _ in range(1000):
        A = rng.normal(size=(3, 3)) * rng.uniform(0.01, 10)
        M = A.T @ A
        e = sorted_eigendecomposition(M)
        V, lam = e.rotation_basis, e.eigenvalues
        assert lam[0] >= lam[1] >= lam[2] >= -1e-12
        assert abs(np.linalg.det(V) - 1) < 1e-9
        assert np.linalg.norm(V @ np.diag(lam) @ V.T - M) < 1e-9 * np.linalg.norm(M)
        z = V[:, 2] @ [0, 0, 1]
        assert z >= 0 or abs(z) <= 1e-9


def test_eigendecomposition_is_deterministic(rng):
    A = rng.normal(size=(3, 3))
    M = A @ A.T
    e1, e2 = sorted_eigendecomposition(M), sorted_eigendecomposition(M.copy())
    assert np.array_equal(e1.rotation_basis, e2.rotation_basis)


def test_eigendecomposition_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        sorted_eigendecomposition(np.array([[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]))


def test_quaternion_round_trip(rng):
    for _ in range(200):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        q = -q if q[3] < 0 else q
        assert np.allclose(rotation_to_quat(quat_to_rotation(q)), q, atol=1e-12)


def test_rotation_angle_matches_arccos(rng):
    for angle in [0.0, 1e-6, 0.2, 1.0, 2.5, math.pi - 1e-4]:
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        R = exp_se3(np.r_[axis * angle, 0, 0, 0]).rotation
        assert abs(rotation_angle(R) - angle) < 1e-9
        if 1e-3 < angle < 3.0:
            assert abs(rotation_angle(R) - math.acos((np.trace(R) - 1) / 2)) < 1e-12
