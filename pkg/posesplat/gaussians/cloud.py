# Licensed under GPL version 3 - see LICENSE.rst
'''The canonical cloud of 3D Gaussians.'''
import numpy as np
from scipy.spatial import cKDTree
from astropy.table import Table

from ..math.rotations import quat2mat, quat2mat_backward, quat_normalize, quat_normalize_backward
from ..math.sh import n_coeffs, rgb_to_sh_dc
from ..math.utils import sigmoid, logit

__all__ = ['GaussianCloud', 'covariance_from', 'covariance_backward', 'PARAMETER_NAMES']

PARAMETER_NAMES = ('positions', 'rotations', 'log_scales', 'opacity_logits', 'sh_coeffs')
'''Names of the per-Gaussian parameter arrays, in storage order.'''


def covariance_from(log_scale, rotation):
    '''Covariance ``R S S^T R^T`` of Gaussians.

    Parameters
    ----------
    log_scale : np.array of shape (..., 3)
        Natural log of the standard deviation along each local axis.
    rotation : np.array of shape (..., 4)
        Quaternion; normalized before use.

    Returns
    -------
    cov : np.array of shape (..., 3, 3)
    '''
    rot = quat2mat(quat_normalize(rotation))
    m = rot * np.exp(np.asanyarray(log_scale, dtype=float))[..., None, :]
    cov = m @ np.swapaxes(m, -1, -2)
    # exact symmetry
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def covariance_backward(log_scale, rotation, grad_cov):
    '''Gradient of `covariance_from` with respect to its inputs.

    Parameters
    ----------
    log_scale : np.array of shape (..., 3)
    rotation : np.array of shape (..., 4)
    grad_cov : np.array of shape (..., 3, 3)

    Returns
    -------
    grad_log_scale : np.array of shape (..., 3)
    grad_rotation : np.array of shape (..., 4)
    '''
    qn = quat_normalize(rotation)
    rot = quat2mat(qn)
    scale = np.exp(log_scale)
    m = rot * scale[..., None, :]
    g = 0.5 * (grad_cov + np.swapaxes(grad_cov, -1, -2))
    grad_m = 2 * g @ m
    grad_rot = grad_m * scale[..., None, :]
    grad_log_scale = np.sum(grad_m * rot, axis=-2) * scale
    grad_q = quat_normalize_backward(rotation, quat2mat_backward(qn, grad_rot))
    return grad_log_scale, grad_q


class GaussianCloud:
    '''Set of 3D Gaussians with position, rotation, scale, opacity and color.

    All parameters are stored unconstrained: scales as natural logs, opacity
    as logits; the activations (`numpy.exp`, sigmoid) are applied where the
    values are used. The arrays are plain numpy arrays; the optimizer
    updates them in place, all other operations return new clouds.

    Parameters
    ----------
    positions : np.array of shape (N, 3)
    rotations : np.array of shape (N, 4)
        Unit quaternions ``(w, x, y, z)``.
    log_scales : np.array of shape (N, 3)
    opacity_logits : np.array of shape (N, )
    sh_coeffs : np.array of shape (N, B, 3)
        ``B = (degree + 1)**2`` coefficients per color channel.
    '''
    def __init__(self, positions, rotations, log_scales, opacity_logits, sh_coeffs):
        self.positions = np.array(positions, dtype=float).reshape(-1, 3)
        self.rotations = np.array(rotations, dtype=float).reshape(-1, 4)
        self.log_scales = np.array(log_scales, dtype=float).reshape(-1, 3)
        self.opacity_logits = np.array(opacity_logits, dtype=float).reshape(-1)
        self.sh_coeffs = np.array(sh_coeffs, dtype=float)
        if self.sh_coeffs.ndim != 3 or self.sh_coeffs.shape[2] != 3:
            raise ValueError('sh_coeffs must have shape (N, B, 3).')
        self.validate()

    def validate(self):
        '''Check shapes and values of the parameter arrays.

        Raises
        ------
        ValueError
            If the arrays have inconsistent lengths, the rotations are not
            unit quaternions or the scales are not finite.
        '''
        n = len(self.positions)
        for name in PARAMETER_NAMES:
            if len(getattr(self, name)) != n:
                raise ValueError('{0} has {1} rows, but there are {2} positions.'.format(
                    name, len(getattr(self, name)), n))
        b = self.sh_coeffs.shape[1]
        if int(np.sqrt(b))**2 != b or b > 16:
            raise ValueError('sh_coeffs must have 1, 4, 9 or 16 coefficients per channel, not {0}.'.format(b))
        if not np.allclose(np.linalg.norm(self.rotations, axis=1), 1, atol=1e-5):
            raise ValueError('All rotations must be unit quaternions.')
        if not np.all(np.isfinite(np.exp(self.log_scales))):
            raise ValueError('exp(log_scales) must be finite.')

    def __len__(self):
        return len(self.positions)

    @property
    def sh_degree(self):
        return int(np.sqrt(self.sh_coeffs.shape[1])) - 1

    @property
    def scales(self):
        return np.exp(self.log_scales)

    @property
    def opacities(self):
        return sigmoid(self.opacity_logits)

    @property
    def covariances(self):
        return covariance_from(self.log_scales, self.rotations)

    def parameters(self):
        '''Parameter arrays by name (the arrays themselves, not copies).'''
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def copy(self):
        return GaussianCloud(**{k: v.copy() for k, v in self.parameters().items()})

    def select(self, index):
        '''New cloud with the Gaussians in ``index`` (boolean mask or integer array).'''
        return GaussianCloud(**{k: v[index] for k, v in self.parameters().items()})

    def concatenate(self, other):
        '''New cloud with the Gaussians of ``self`` followed by those of ``other``.'''
        if other.sh_coeffs.shape[1] != self.sh_coeffs.shape[1]:
            raise ValueError('Cannot concatenate clouds with different SH degrees.')
        return GaussianCloud(**{k: np.concatenate([v, getattr(other, k)])
                                for k, v in self.parameters().items()})

    def bbox_diagonal(self):
        '''Length of the diagonal of the axis-aligned bounding box of the positions.'''
        if len(self) == 0:
            return 0.
        return float(np.linalg.norm(self.positions.max(axis=0) - self.positions.min(axis=0)))

    @classmethod
    def empty(cls, sh_degree=3):
        return cls(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)), np.zeros(0),
                   np.zeros((0, n_coeffs(sh_degree), 3)))

    @classmethod
    def from_points(cls, points, sh_degree=3, colors=0.5, opacity=0.1, k=3):
        '''Initialize one isotropic Gaussian per point.

        The scale of each Gaussian is the root mean square distance to its
        ``k`` nearest neighbors, all rotations are the identity and only the
        constant (DC) SH band is set.

        Parameters
        ----------
        points : np.array of shape (N, 3)
            E.g. the vertices of the body model in the canonical pose.
        sh_degree : int
        colors : float or np.array of shape (3, ) or (N, 3)
            RGB color in [0, 1].
        opacity : float
            Initial opacity in (0, 1).
        k : int
            Number of neighbors for the scale estimate.

        Returns
        -------
        cloud : `GaussianCloud`
        '''
        points = np.asanyarray(points, dtype=float)
        n = len(points)
        if n > 1:
            kk = min(k, n - 1)
            dist, ind = cKDTree(points).query(points, k=kk + 1)
            dist2 = np.mean(dist[:, 1:].reshape(n, kk)**2, axis=1)
        else:
            dist2 = np.ones(n)
        dist2 = np.clip(dist2, 1e-14, None)
        rotations = np.zeros((n, 4))
        rotations[:, 0] = 1.
        sh = np.zeros((n, n_coeffs(sh_degree), 3))
        sh[:, 0, :] = rgb_to_sh_dc(np.broadcast_to(colors, (n, 3)))
        return cls(points, rotations, np.tile(0.5 * np.log(dist2)[:, None], (1, 3)),
                   np.full(n, logit(opacity)), sh)

    def to_table(self):
        '''Parameters as an `astropy.table.Table` with one row per Gaussian.'''
        tab = Table(self.parameters(), names=PARAMETER_NAMES)
        tab.meta['SHDEGREE'] = self.sh_degree
        return tab

    @classmethod
    def from_table(cls, tab):
        '''Inverse of `to_table`.'''
        kwargs = {name: np.asarray(tab[name], dtype=float) for name in PARAMETER_NAMES}
        if len(tab) == 0:
            kwargs['sh_coeffs'] = np.zeros((0, n_coeffs(int(tab.meta.get('SHDEGREE', 3))), 3))
        return cls(**kwargs)
