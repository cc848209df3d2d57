# Licensed under GPL version 3 - see LICENSE.rst
'''Real spherical harmonics up to degree 3.

The basis functions are ordered by band ``l`` and within each band by ``m``
from ``-l`` to ``l``, with the sign convention of the 3D Gaussian splatting
reference rasterizer, so coefficients can be exchanged with its PLY files.
Colors are ``sum_b Y_b(d) f_b + 0.5`` (see `sh_to_color`).
'''
import numpy as np

__all__ = ['SH_C0', 'n_coeffs', 'sh_eval', 'sh_eval_jacobian', 'sh_to_color',
           'sh_to_color_backward', 'rgb_to_sh_dc']

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)

MAX_DEGREE = 3


def n_coeffs(degree):
    '''Number of basis functions ``(degree + 1)**2``.'''
    return (degree + 1)**2


def _check_degree(degree):
    if not (0 <= degree <= MAX_DEGREE):
        raise ValueError('SH degree must be between 0 and {0}, got {1}.'.format(MAX_DEGREE, degree))


def sh_eval(degree, dirs):
    '''Evaluate the SH basis along unit directions.

    Parameters
    ----------
    degree : int
        0, 1, 2 or 3.
    dirs : np.array of shape (..., 3)
        Unit vectors.

    Returns
    -------
    basis : np.array of shape (..., (degree + 1)**2)
    '''
    _check_degree(degree)
    dirs = np.asanyarray(dirs, dtype=float)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    out = np.empty(dirs.shape[:-1] + (n_coeffs(degree),))
    out[..., 0] = SH_C0
    if degree > 0:
        out[..., 1] = -SH_C1 * y
        out[..., 2] = SH_C1 * z
        out[..., 3] = -SH_C1 * x
    if degree > 1:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 4] = SH_C2[0] * x * y
        out[..., 5] = SH_C2[1] * y * z
        out[..., 6] = SH_C2[2] * (2 * zz - xx - yy)
        out[..., 7] = SH_C2[3] * x * z
        out[..., 8] = SH_C2[4] * (xx - yy)
    if degree > 2:
        out[..., 9] = SH_C3[0] * y * (3 * xx - yy)
        out[..., 10] = SH_C3[1] * x * y * z
        out[..., 11] = SH_C3[2] * y * (4 * zz - xx - yy)
        out[..., 12] = SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy)
        out[..., 13] = SH_C3[4] * x * (4 * zz - xx - yy)
        out[..., 14] = SH_C3[5] * z * (xx - yy)
        out[..., 15] = SH_C3[6] * x * (xx - 3 * yy)
    return out


def sh_eval_jacobian(degree, dirs):
    '''Derivative of `sh_eval` with respect to the direction components.

    The polynomials are differentiated as functions on all of R^3; the
    projection onto the sphere happens where the direction is normalized.

    Returns
    -------
    jac : np.array of shape (..., (degree + 1)**2, 3)
    '''
    _check_degree(degree)
    dirs = np.asanyarray(dirs, dtype=float)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    jac = np.zeros(dirs.shape[:-1] + (n_coeffs(degree), 3))
    if degree > 0:
        jac[..., 1, 1] = -SH_C1
        jac[..., 2, 2] = SH_C1
        jac[..., 3, 0] = -SH_C1
    if degree > 1:
        jac[..., 4, 0] = SH_C2[0] * y
        jac[..., 4, 1] = SH_C2[0] * x
        jac[..., 5, 1] = SH_C2[1] * z
        jac[..., 5, 2] = SH_C2[1] * y
        jac[..., 6, 0] = -2 * SH_C2[2] * x
        jac[..., 6, 1] = -2 * SH_C2[2] * y
        jac[..., 6, 2] = 4 * SH_C2[2] * z
        jac[..., 7, 0] = SH_C2[3] * z
        jac[..., 7, 2] = SH_C2[3] * x
        jac[..., 8, 0] = 2 * SH_C2[4] * x
        jac[..., 8, 1] = -2 * SH_C2[4] * y
    if degree > 2:
        xx, yy, zz = x * x, y * y, z * z
        jac[..., 9, 0] = SH_C3[0] * 6 * x * y
        jac[..., 9, 1] = SH_C3[0] * 3 * (xx - yy)
        jac[..., 10, 0] = SH_C3[1] * y * z
        jac[..., 10, 1] = SH_C3[1] * x * z
        jac[..., 10, 2] = SH_C3[1] * x * y
        jac[..., 11, 0] = SH_C3[2] * -2 * x * y
        jac[..., 11, 1] = SH_C3[2] * (4 * zz - xx - 3 * yy)
        jac[..., 11, 2] = SH_C3[2] * 8 * y * z
        jac[..., 12, 0] = SH_C3[3] * -6 * x * z
        jac[..., 12, 1] = SH_C3[3] * -6 * y * z
        jac[..., 12, 2] = SH_C3[3] * (6 * zz - 3 * xx - 3 * yy)
        jac[..., 13, 0] = SH_C3[4] * (4 * zz - 3 * xx - yy)
        jac[..., 13, 1] = SH_C3[4] * -2 * x * y
        jac[..., 13, 2] = SH_C3[4] * 8 * x * z
        jac[..., 14, 0] = SH_C3[5] * 2 * x * z
        jac[..., 14, 1] = SH_C3[5] * -2 * y * z
        jac[..., 14, 2] = SH_C3[5] * (xx - yy)
        jac[..., 15, 0] = SH_C3[6] * 3 * (xx - yy)
        jac[..., 15, 1] = SH_C3[6] * -6 * x * y
    return jac


def sh_to_color(sh_coeffs, dirs):
    '''RGB colors of SH coefficients seen from directions ``dirs``.

    Colors are clamped to [0, 1].

    Parameters
    ----------
    sh_coeffs : np.array of shape (N, B, 3)
    dirs : np.array of shape (N, 3)
        Unit vectors.

    Returns
    -------
    color : np.array of shape (N, 3)
    raw : np.array of shape (N, 3)
        Colors before clamping, needed for the backward pass.
    '''
    degree = int(np.sqrt(sh_coeffs.shape[1])) - 1
    basis = sh_eval(degree, dirs)
    raw = np.einsum('nb,nbc->nc', basis, sh_coeffs) + 0.5
    return np.clip(raw, 0., 1.), raw


def sh_to_color_backward(sh_coeffs, dirs, raw, grad_color):
    '''Gradients of `sh_to_color`.

    Returns
    -------
    grad_sh : np.array of shape (N, B, 3)
    grad_dirs : np.array of shape (N, 3)
    '''
    degree = int(np.sqrt(sh_coeffs.shape[1])) - 1
    g = np.where((raw > 0.) & (raw < 1.), grad_color, 0.)
    basis = sh_eval(degree, dirs)
    grad_sh = basis[:, :, None] * g[:, None, :]
    # d color_c / d basis_b = f_bc
    grad_basis = np.einsum('nbc,nc->nb', sh_coeffs, g)
    grad_dirs = np.einsum('nb,nbk->nk', grad_basis, sh_eval_jacobian(degree, dirs))
    return grad_sh, grad_dirs


def rgb_to_sh_dc(rgb):
    '''DC coefficient that produces color ``rgb`` from every direction.'''
    return (np.asanyarray(rgb, dtype=float) - 0.5) / SH_C0
