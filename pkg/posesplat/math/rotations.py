# Licensed under GPL version 3 - see LICENSE.rst
'''Rotations as axis-angle vectors, matrices and quaternions.

Quaternions are stored as ``(w, x, y, z)`` in the last axis of an array,
the same order `transforms3d.quaternions` uses. All functions accept stacks
of quaternions, vectors or matrices and broadcast over the leading axes.

Functions that end in ``_backward`` take the inputs of the forward function
and the gradient of a scalar loss with respect to its output and return the
gradient with respect to the inputs.
'''
import numpy as np
from scipy.spatial.transform import Rotation

from ..utils import GeometryError
from .utils import norm_vector, norm_vector_backward, skew

__all__ = ['axangle2mat', 'rotvec2mat', 'rotvec2mat_jacobian', 'wrap_rotvec',
           'quat_mul', 'quat_mul_backward', 'quat_conj', 'quat_normalize',
           'quat_normalize_backward', 'quat2mat', 'quat2mat_backward',
           'quat_rotate', 'polar_decompose', 'polar_backward',
           'quat_from_rotation_matrix', 'polar_quat', 'polar_quat_backward',
           ]


def axangle2mat(axes, angles, is_normalized=False):
    ''' Rotation matrix for rotation angle `angle` around `axis`

    This is a vectorized version of the routine of the same name in
    ``transforms3d``.

    Parameters
    ----------
    axes : np.array of shape (N, 3)
       vector specifying axis for rotation.
    angle : np.array
       angle of rotation in radians.
    is_normalized : bool, optional
       True if `axis` is already normalized (has norm of 1).  Default False.

    Returns
    -------
    mat : array shape (N, 3,3)
       rotation matrices for specified rotation

    Notes
    -----
    From: http://en.wikipedia.org/wiki/Rotation_matrix#Axis_and_angle
    '''
    if len(angles) != axes.shape[0]:
        raise ValueError('There must be one angle for each axes vector.')

    if not is_normalized:
        axes = axes / np.linalg.norm(axes, axis=1)[:, None]
    c = np.cos(angles); s = np.sin(angles); C = 1-c
    x = axes[:, 0]; y = axes[:, 1]; z = axes[:, 2]
    xs = x*s;   ys = y*s;   zs = z*s
    xC = x*C;   yC = y*C;   zC = z*C
    xyC = x*yC; yzC = y*zC; zxC = z*xC
    return np.array([
            [ x*xC+c,   xyC-zs,   zxC+ys ],
            [ xyC+zs,   y*yC+c,   yzC-xs ],
            [ zxC-ys,   yzC+xs,   z*zC+c ]]).swapaxes(0,2).swapaxes(1,2)


def rotvec2mat(rotvecs):
    '''Rotation matrices for axis-angle vectors (direction = axis, length = angle).

    Parameters
    ----------
    rotvecs : np.array of shape (..., 3)

    Returns
    -------
    mat : np.array of shape (..., 3, 3)
    '''
    rotvecs = np.asanyarray(rotvecs, dtype=float)
    flat = rotvecs.reshape(-1, 3)
    angles = np.linalg.norm(flat, axis=1)
    axes = np.zeros_like(flat)
    axes[:, 0] = 1.
    nonzero = angles > 0
    axes[nonzero] = flat[nonzero] / angles[nonzero][:, None]
    return axangle2mat(axes, angles, is_normalized=True).reshape(rotvecs.shape[:-1] + (3, 3))


def rotvec2mat_jacobian(rotvecs):
    '''Derivative of `rotvec2mat` with respect to each axis-angle component.

    Uses the closed form of the derivative of the Rodrigues formula,
    ``dR/dv_i = (v_i [v]_x + [v x (I - R) e_i]_x) R / |v|**2``,
    which tends to ``[e_i]_x`` for a vanishing rotation.

    Parameters
    ----------
    rotvecs : np.array of shape (..., 3)

    Returns
    -------
    jac : np.array of shape (..., 3, 3, 3)
        ``jac[..., i, :, :]`` is the derivative of the rotation matrix with
        respect to ``rotvecs[..., i]``.
    '''
    rotvecs = np.asanyarray(rotvecs, dtype=float)
    rot = rotvec2mat(rotvecs)
    eye = np.eye(3)
    angle2 = np.sum(rotvecs**2, axis=-1)
    small = angle2 < 1e-16
    jac = np.empty(rotvecs.shape[:-1] + (3, 3, 3))
    vx = skew(rotvecs)
    imr = eye - rot
    for i in range(3):
        # (I - R) e_i is the i-th column of I - R
        cross = np.cross(rotvecs, imr[..., :, i])
        num = rotvecs[..., i, None, None] * vx + skew(cross)
        with np.errstate(invalid='ignore', divide='ignore'):
            ji = (num @ rot) / angle2[..., None, None]
        ji[small] = skew(eye[i])
        jac[..., i, :, :] = ji
    return jac


def wrap_rotvec(rotvecs):
    '''Map axis-angle vectors to the equivalent vector with angle <= pi.

    Parameters
    ----------
    rotvecs : np.array of shape (..., 3)

    Returns
    -------
    rotvecs : np.array of shape (..., 3)
    '''
    rotvecs = np.array(rotvecs, dtype=float)
    angle = np.linalg.norm(rotvecs, axis=-1)
    wrapped = np.remainder(angle + np.pi, 2 * np.pi) - np.pi
    big = angle > np.pi
    rotvecs[big] *= (wrapped[big] / angle[big])[:, None]
    return rotvecs


def quat_conj(q):
    '''Conjugate quaternion (the inverse for unit quaternions).'''
    q = np.array(q, dtype=float)
    q[..., 1:] *= -1
    return q


def quat_mul(q1, q2):
    '''Hamilton product ``q1 * q2`` of (stacks of) quaternions.'''
    q1 = np.asanyarray(q1, dtype=float)
    q2 = np.asanyarray(q2, dtype=float)
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack([w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                     w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                     w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                     w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2], axis=-1)


def quat_mul_backward(q1, q2, grad):
    '''Gradients of ``quat_mul(q1, q2)`` with respect to ``q1`` and ``q2``.'''
    return quat_mul(grad, quat_conj(q2)), quat_mul(quat_conj(q1), grad)


def quat_normalize(q):
    '''Scale quaternions to unit norm.'''
    return norm_vector(np.asanyarray(q, dtype=float))


def quat_normalize_backward(q, grad):
    return norm_vector_backward(np.asanyarray(q, dtype=float), grad)


def quat2mat(q):
    '''Rotation matrices for unit quaternions.

    The input is not normalized; call `quat_normalize` first if needed.

    Parameters
    ----------
    q : np.array of shape (..., 4)

    Returns
    -------
    mat : np.array of shape (..., 3, 3)
    '''
    q = np.asanyarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    mat = np.empty(q.shape[:-1] + (3, 3))
    mat[..., 0, 0] = 1 - 2 * (y * y + z * z)
    mat[..., 0, 1] = 2 * (x * y - w * z)
    mat[..., 0, 2] = 2 * (x * z + w * y)
    mat[..., 1, 0] = 2 * (x * y + w * z)
    mat[..., 1, 1] = 1 - 2 * (x * x + z * z)
    mat[..., 1, 2] = 2 * (y * z - w * x)
    mat[..., 2, 0] = 2 * (x * z - w * y)
    mat[..., 2, 1] = 2 * (y * z + w * x)
    mat[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return mat


def quat2mat_backward(q, grad):
    '''Gradient of `quat2mat` with respect to the quaternion components.

    Parameters
    ----------
    q : np.array of shape (..., 4)
    grad : np.array of shape (..., 3, 3)
        Gradient with respect to the rotation matrix.

    Returns
    -------
    grad_q : np.array of shape (..., 4)
    '''
    q = np.asanyarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    g = grad
    dw = 2 * (-z * g[..., 0, 1] + y * g[..., 0, 2] + z * g[..., 1, 0]
              - x * g[..., 1, 2] - y * g[..., 2, 0] + x * g[..., 2, 1])
    dx = 2 * (y * g[..., 0, 1] + z * g[..., 0, 2] + y * g[..., 1, 0]
              - 2 * x * g[..., 1, 1] - w * g[..., 1, 2] + z * g[..., 2, 0]
              + w * g[..., 2, 1] - 2 * x * g[..., 2, 2])
    dy = 2 * (-2 * y * g[..., 0, 0] + x * g[..., 0, 1] + w * g[..., 0, 2]
              + x * g[..., 1, 0] + z * g[..., 1, 2] - w * g[..., 2, 0]
              + z * g[..., 2, 1] - 2 * y * g[..., 2, 2])
    dz = 2 * (-2 * z * g[..., 0, 0] - w * g[..., 0, 1] + x * g[..., 0, 2]
              + w * g[..., 1, 0] - 2 * z * g[..., 1, 1] + y * g[..., 1, 2]
              + x * g[..., 2, 0] + y * g[..., 2, 1])
    return np.stack([dw, dx, dy, dz], axis=-1)


def quat_rotate(q, v):
    '''Rotate vectors ``v`` by quaternions ``q``.

    ``q`` is normalized before use, so any non-zero quaternion is accepted.

    Parameters
    ----------
    q : np.array of shape (..., 4)
    v : np.array of shape (..., 3)

    Returns
    -------
    v_rot : np.array of shape (..., 3)
    '''
    mat = quat2mat(quat_normalize(q))
    return np.einsum('...ij,...j->...i', mat, np.asanyarray(v, dtype=float))


def polar_decompose(m):
    '''Rotation part of the polar decomposition of (stacks of) 3x3 matrices.

    ``m = R P`` with ``R`` orthonormal and ``P`` symmetric positive
    semi-definite; ``R`` is the rotation closest to ``m`` in the Frobenius
    norm.

    Parameters
    ----------
    m : np.array of shape (..., 3, 3)

    Returns
    -------
    rot : np.array of shape (..., 3, 3)
    svd : tuple
        ``(u, s, vt)`` of ``m``, needed by `polar_backward`.

    Raises
    ------
    GeometryError
        If the closest orthonormal matrix is a reflection (``det <= 0``).
    '''
    m = np.asanyarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m)
    rot = u @ vt
    if np.any(np.linalg.det(rot) <= 0):
        raise GeometryError('Matrix has det <= 0 after projection onto the orthonormal matrices.')
    return rot, (u, s, vt)


def polar_backward(svd, grad):
    '''Backpropagate a gradient on the polar rotation to the input matrix.

    Parameters
    ----------
    svd : tuple
        Second return value of `polar_decompose`.
    grad : np.array of shape (..., 3, 3)
        Gradient with respect to the rotation.

    Returns
    -------
    grad_m : np.array of shape (..., 3, 3)
    '''
    u, s, vt = svd
    v = np.swapaxes(vt, -1, -2)
    b = np.swapaxes(u, -1, -2) @ grad @ v
    denom = s[..., :, None] + s[..., None, :]
    z = (b - np.swapaxes(b, -1, -2)) / denom
    return u @ z @ vt


def _mat2quat(rot):
    shape = rot.shape[:-2]
    if rot.size == 0:
        return np.zeros(shape + (4,))
    xyzw = Rotation.from_matrix(rot.reshape(-1, 3, 3)).as_quat()
    q = np.roll(xyzw, 1, axis=-1)
    q[q[:, 0] < 0] *= -1
    return q.reshape(shape + (4,))


def quat_from_rotation_matrix(m):
    '''Unit quaternion of the rotation closest to ``m``.

    ``m`` does not need to be exactly orthonormal (a linear blend of rotation
    matrices is not); the rotation factor of its polar decomposition is used.
    The returned quaternion has a non-negative scalar part.

    Parameters
    ----------
    m : np.array of shape (3, 3) or (N, 3, 3)

    Returns
    -------
    q : np.array of shape (4, ) or (N, 4)

    Raises
    ------
    GeometryError
        If ``det <= 0`` after projection onto the rotations.
    '''
    rot, svd = polar_decompose(m)
    return _mat2quat(rot)


def polar_quat(m):
    '''Same as `quat_from_rotation_matrix`, but keeps what the backward pass needs.

    Returns
    -------
    q : np.array of shape (..., 4)
    rot : np.array of shape (..., 3, 3)
        Polar rotation factor of ``m``.
    svd : tuple
    '''
    rot, svd = polar_decompose(m)
    return _mat2quat(rot), rot, svd


def polar_quat_backward(q, rot, svd, grad_q, grad_rot=None):
    '''Gradient of `polar_quat` with respect to the input matrix.

    The gradient on the quaternion is mapped to the tangent space of the
    rotation group (right perturbation ``R exp([w]_x)``, for which
    ``dq = q * (0, w / 2)``) and expressed as an equivalent gradient on the
    rotation matrix.

    Parameters
    ----------
    q, rot, svd :
        Outputs of `polar_quat`.
    grad_q : np.array of shape (..., 4)
        Gradient with respect to the quaternion.
    grad_rot : np.array of shape (..., 3, 3) or None
        Additional gradient with respect to the rotation matrix.

    Returns
    -------
    grad_m : np.array of shape (..., 3, 3)
    '''
    a = 0.5 * quat_mul(quat_conj(q), grad_q)[..., 1:]
    g = 0.5 * rot @ skew(a)
    if grad_rot is not None:
        g = g + grad_rot
    return polar_backward(svd, g)
