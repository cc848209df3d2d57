# Licensed under GPL version 3 - see LICENSE.rst
import numpy as np
import pytest
from transforms3d import axangles, quaternions

from ...utils import GeometryError
from ...tests.helpers import numerical_gradient, random_unit_quaternions
from ..rotations import (axangle2mat, rotvec2mat, rotvec2mat_jacobian, wrap_rotvec,
                         quat_mul, quat_mul_backward, quat_conj, quat_normalize,
                         quat2mat, quat2mat_backward, quat_rotate,
                         polar_decompose, polar_backward,
                         quat_from_rotation_matrix, polar_quat, polar_quat_backward)

rng = np.random.default_rng(12)
qz90 = np.array([np.sqrt(.5), 0, 0, np.sqrt(.5)])
rz90 = np.array([[0., -1, 0], [1, 0, 0], [0, 0, 1]])


def is_specialorthogonal(a):
    return np.allclose(a @ np.swapaxes(a, -1, -2), np.eye(3), atol=1e-5) and \
        np.allclose(np.linalg.det(a), 1, atol=1e-5)


def test_axangle2mat():
    '''Check that vectorized version gives same answers.'''
    axis = rng.random((4, 3))
    angles = np.arange(4.)
    out = axangle2mat(axis, angles)
    assert np.all(out[0, :, :] == np.eye(3))
    for i in range(3):
        out1 = axangles.axangle2mat(axis[i + 1, :], angles[i + 1])
        assert np.allclose(out[i + 1, :, :], out1)


def test_rotvec2mat_zero_and_shape():
    v = np.zeros((2, 5, 3))
    v[1, 3] = [0, 0, np.pi / 2]
    m = rotvec2mat(v)
    assert m.shape == (2, 5, 3, 3)
    assert np.all(m[0] == np.eye(3))
    assert np.allclose(m[1, 3], rz90)


@pytest.mark.parametrize('scale', [0., 1e-3, 0.5, 2.5])
def test_rotvec2mat_jacobian(scale):
    v = rng.normal(size=(4, 3))
    v = scale * v / np.linalg.norm(v, axis=1)[:, None]
    jac = rotvec2mat_jacobian(v)
    g = rng.normal(size=(4, 3, 3))

    def loss():
        return np.sum(g * rotvec2mat(v))

    num = numerical_gradient(loss, v, eps=1e-6)
    ana = np.einsum('nkij,nij->nk', jac, g)
    assert np.allclose(ana, num, rtol=1e-5, atol=1e-8)


def test_wrap_rotvec():
    v = np.array([[0., 0, 1.5 * np.pi], [0.3, 0, 0]])
    w = wrap_rotvec(v)
    assert np.allclose(w[0], [0, 0, -0.5 * np.pi])
    assert np.all(w[1] == v[1])
    assert np.allclose(rotvec2mat(w), rotvec2mat(v))
    assert np.all(np.linalg.norm(w, axis=1) <= np.pi)


def test_quat_mul_matches_transforms3d():
    q1, q2 = random_unit_quaternions(rng, 2)
    assert np.allclose(quat_mul(q1, q2), quaternions.qmult(q1, q2))


def test_quat_rotate_examples():
    assert np.allclose(quat_rotate([1., 0, 0, 0], [1., 2, 3]), [1, 2, 3])
    assert np.allclose(quat_rotate(qz90, [1., 0, 0]), [0, 1, 0], atol=1e-12)
    q = random_unit_quaternions(rng, 1)[0]
    assert np.all(quat_rotate(q, np.zeros(3)) == 0)


def test_quat_rotate_normalizes():
    assert np.allclose(quat_rotate(3 * qz90, [1., 0, 0]), [0, 1, 0], atol=1e-12)


def test_quat_rotate_composes():
    q1 = random_unit_quaternions(rng, 10)
    q2 = random_unit_quaternions(rng, 10)
    v = rng.normal(size=(10, 3))
    lhs = quat_rotate(quat_mul(q1, q2), v)
    rhs = quat_rotate(q1, quat_rotate(q2, v))
    assert np.allclose(lhs, rhs, atol=1e-6)
    assert np.allclose(np.linalg.norm(lhs, axis=1), np.linalg.norm(v, axis=1), atol=1e-6)


def test_quat2mat_matches_transforms3d():
    q = random_unit_quaternions(rng, 5)
    m = quat2mat(q)
    for i in range(5):
        assert np.allclose(m[i], quaternions.quat2mat(q[i]))
    assert is_specialorthogonal(m)


def test_quat_from_rotation_matrix_examples():
    assert np.allclose(quat_from_rotation_matrix(np.eye(3)), [1, 0, 0, 0])
    assert np.allclose(quat_from_rotation_matrix(rz90), qz90)
    assert np.allclose(quat_from_rotation_matrix(1.02 * rz90), qz90)


def test_quat_from_rotation_matrix_roundtrip():
    q = random_unit_quaternions(rng, 20)
    q2 = quat_from_rotation_matrix(quat2mat(q))
    same = np.all(np.isclose(q, q2, atol=1e-5), axis=1) | np.all(np.isclose(q, -q2, atol=1e-5), axis=1)
    assert np.all(same)
    assert np.all(q2[:, 0] >= 0)


def test_quat_from_rotation_matrix_reflection():
    with pytest.raises(GeometryError) as e:
        quat_from_rotation_matrix(np.diag([1., 1, -1]))
    assert 'det <= 0' in str(e.value)


def test_polar_of_perturbed_rotation():
    rot = quat2mat(random_unit_quaternions(rng, 3))
    m = rot + 0.05 * rng.normal(size=(3, 3, 3))
    r, svd = polar_decompose(m)
    assert is_specialorthogonal(r)
    # the symmetric factor R^T m
    p = np.swapaxes(r, -1, -2) @ m
    assert np.allclose(p, np.swapaxes(p, -1, -2))


def test_quat2mat_backward():
    q = rng.normal(size=(3, 4))
    g = rng.normal(size=(3, 3, 3))

    def loss():
        return np.sum(g * quat2mat(q))

    assert np.allclose(quat2mat_backward(q, g), numerical_gradient(loss, q), rtol=1e-6, atol=1e-9)


def test_quat_mul_backward():
    q1 = rng.normal(size=(3, 4))
    q2 = rng.normal(size=(3, 4))
    g = rng.normal(size=(3, 4))

    def loss():
        return np.sum(g * quat_mul(q1, q2))

    d1, d2 = quat_mul_backward(q1, q2, g)
    assert np.allclose(d1, numerical_gradient(loss, q1))
    assert np.allclose(d2, numerical_gradient(loss, q2))


def test_polar_backward():
    m = quat2mat(random_unit_quaternions(rng, 2)) + 0.1 * rng.normal(size=(2, 3, 3))
    g = rng.normal(size=(2, 3, 3))

    def loss():
        return np.sum(g * polar_decompose(m)[0])

    r, svd = polar_decompose(m)
    assert np.allclose(polar_backward(svd, g), numerical_gradient(loss, m, eps=1e-6),
                       rtol=1e-4, atol=1e-8)


def test_polar_quat_backward():
    '''The quaternion gradient is folded into the matrix gradient.'''
    m = quat2mat(random_unit_quaternions(rng, 2)) + 0.1 * rng.normal(size=(2, 3, 3))
    gq = rng.normal(size=(2, 4))
    gr = rng.normal(size=(2, 3, 3))

    def loss():
        q, r, svd = polar_quat(m)
        return np.sum(gq * q) + np.sum(gr * r)

    q, r, svd = polar_quat(m)
    ana = polar_quat_backward(q, r, svd, gq, gr)
    assert np.allclose(ana, numerical_gradient(loss, m, eps=1e-6), rtol=1e-4, atol=1e-8)


def test_quat_conj_is_inverse():
    q = random_unit_quaternions(rng, 4)
    assert np.allclose(quat_mul(q, quat_conj(q)), [1, 0, 0, 0])
    assert np.allclose(np.linalg.norm(quat_normalize(3 * q), axis=1), 1)
