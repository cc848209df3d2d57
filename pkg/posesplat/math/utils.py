# Licensed under GPL version 3 - see LICENSE.rst
import numpy as np
from scipy.special import expit, logit

__all__ = ['e2h', 'h2e', 'translation2aff', 'mat2aff', 'apply_affine', 'norm_vector',
           'norm_vector_backward', 'skew', 'sigmoid']


def e2h(e, w):
    '''Convert Euclidean coordinates to homogeneous coordinates

    Parameters
    ----------
    e : np.array
        Input Euclidean coordinates. This can be multidimensional, but the last
        dimension must be of size 3.
    w : float
        ``0`` for directions (points at infinity)
        ``1`` for positions (points in Euclidean space)

    Returns
    -------
    h : np.array
        Homogeneous coordinates. Same shape as ``e`` except that the last
        dimension is now has 4 elements.
    '''
    if not ((w == 0) or (w == 1)):
        raise ValueError('w must be 0 or 1.')
    e = np.asanyarray(e, dtype=float)
    shape = list(e.shape)
    shape[-1] += 1
    h = np.empty(shape)
    h[..., :3] = e
    h[..., 3] = w
    return h


def h2e(h):
    '''Convert homogeneous coordinates to Euclidean coordinates

    Parameters
    ----------
    h : np.array
        Input homogeneous coordinates. This can be multidimensional, but the
        last dimension must be of size 4.

    Returns
    -------
    e : np.array
        Euclidean coordinates. Same shape as ``h`` except that the
        last dimension is now has 3 elements.
    '''
    if np.all(h[..., 3] == 0) or np.allclose(h[..., 3], 1):
        return h[..., :3]
    elif np.all(h[..., 3] != 0):
        return (h[..., :3] / h[..., 3][..., None])
    else:
        raise ValueError('Input array must be either all euklidean points or all points at infinity.')


def translation2aff(vec):
    '''Transform 3-d translation vector to affine 4*4 matrix.

    Parameters
    ----------
    vec : (3, ) array
        x, y, z translation vector

    Returns
    -------
    m : (4, 4) array
        affine transformation matrix
    '''
    if len(vec) != 3:
        raise ValueError('3d translation vector expected.')
    m = np.eye(4)
    m[:3, 3] = vec
    return m


def mat2aff(mat):
    '''Transform 3*3 matrices (e.g. rotations) to affine 4*4 matrices.

    Parameters
    ----------
    mat : (..., 3, 3) array
        input matrix or stack of matrices

    Returns
    -------
    m : (..., 4, 4) array
        affine transformation matrix
    '''
    mat = np.asanyarray(mat, dtype=float)
    m = np.zeros(mat.shape[:-2] + (4, 4))
    m[..., :3, :3] = mat
    m[..., 3, 3] = 1.
    return m


def apply_affine(aff, points):
    '''Apply (stacks of) 4*4 affine matrices to Euclidean points.

    ``aff`` and ``points`` are broadcast against each other, so one matrix
    can be applied to many points or one matrix per point.

    Parameters
    ----------
    aff : (..., 4, 4) array
    points : (..., 3) array

    Returns
    -------
    out : (..., 3) array
    '''
    return np.einsum('...ij,...j->...i', aff[..., :3, :3], points) + aff[..., :3, 3]


def norm_vector(vec):
    '''Normalize euklidean vectors.

    Parameters
    ----------
    vec : np.array
        Input vectors of shape (..., 3)

    Returns
    -------
    vec : np.array
        Normalized vectors
    '''
    length2 = np.sum(vec * vec, axis=-1)
    return vec / np.sqrt(length2)[..., None]


def norm_vector_backward(vec, grad):
    '''Backpropagate a gradient through `norm_vector`.

    Parameters
    ----------
    vec : np.array of shape (..., n)
        Input of `norm_vector` (not normalized).
    grad : np.array of shape (..., n)
        Gradient with respect to the normalized vectors.

    Returns
    -------
    grad_vec : np.array of shape (..., n)
    '''
    length = np.linalg.norm(vec, axis=-1)[..., None]
    unit = vec / length
    return (grad - unit * np.sum(unit * grad, axis=-1)[..., None]) / length


def skew(v):
    '''Cross-product matrices ``[v]_x`` for a stack of 3-vectors.'''
    v = np.asanyarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def sigmoid(x):
    '''Logistic function, used to map opacity logits to opacities.'''
    return expit(x)
