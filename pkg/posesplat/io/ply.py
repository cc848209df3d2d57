# Licensed under GPL version 3 - see LICENSE.rst
'''Export of Gaussian clouds in the PLY layout that common splat viewers read.

Each Gaussian is one ``vertex`` with the properties ``x, y, z``, ``f_dc_0..2``,
``f_rest_*`` (the higher SH bands, all coefficients of the red channel
first, then green, then blue),
``opacity`` (logit), ``scale_0..2`` (log) and ``rot_0..3`` (quaternion,
w first).
'''
import numpy as np
from plyfile import PlyData, PlyElement

from ..gaussians import GaussianCloud
from ..utils import CheckpointError
from .utils import atomic_path

__all__ = ['write_ply', 'read_ply', 'ply_properties']


def ply_properties(n_coeffs):
    '''Names of the vertex properties for ``n_coeffs`` SH coefficients.'''
    names = ['x', 'y', 'z']
    names.extend('f_dc_{0}'.format(i) for i in range(3))
    names.extend('f_rest_{0}'.format(i) for i in range(3 * (n_coeffs - 1)))
    names.append('opacity')
    names.extend('scale_{0}'.format(i) for i in range(3))
    names.extend('rot_{0}'.format(i) for i in range(4))
    return names


def write_ply(cloud, filename, single=False):
    '''Write ``cloud`` as binary little-endian PLY.

    Parameters
    ----------
    cloud : `posesplat.gaussians.GaussianCloud`
    filename : str
    single : bool
        Store 32 bit floats, as most viewers expect. The default stores 64
        bit floats, which read back bit for bit.
    '''
    n = len(cloud)
    sh = cloud.sh_coeffs
    columns = [cloud.positions, sh[:, 0, :],
               sh[:, 1:, :].transpose(0, 2, 1).reshape(n, -1),
               cloud.opacity_logits[:, None], cloud.log_scales, cloud.rotations]
    attributes = np.concatenate(columns, axis=1)
    dtype = [(name, 'f4' if single else 'f8') for name in ply_properties(sh.shape[1])]
    elements = np.empty(n, dtype=dtype)
    for i, (name, _) in enumerate(dtype):
        elements[name] = attributes[:, i]
    with atomic_path(filename) as tmp:
        PlyData([PlyElement.describe(elements, 'vertex')], byte_order='<').write(tmp)


def read_ply(filename):
    '''Read a cloud written by `write_ply` or by another splat trainer.

    Quaternions that are not of unit length are normalized.

    Raises
    ------
    posesplat.utils.CheckpointError
        If the file has no ``vertex`` element, misses a property or the
        number of SH coefficients does not belong to an SH degree, or if a
        quaternion has zero length.
    '''
    try:
        plydata = PlyData.read(filename)
    except (OSError, ValueError) as e:
        raise CheckpointError('Cannot read {0}: {1}'.format(filename, e)) from None
    if 'vertex' not in [el.name for el in plydata.elements]:
        raise CheckpointError('{0} has no vertex element.'.format(filename))
    vertex = plydata['vertex']
    names = [p.name for p in vertex.properties]
    n_rest = len([p for p in names if p.startswith('f_rest_')])
    n_coeffs = 1 + n_rest // 3
    degree = int(round(np.sqrt(n_coeffs))) - 1
    if n_rest % 3 != 0 or (degree + 1)**2 != n_coeffs:
        raise CheckpointError('{0}: {1} f_rest properties do not make up full SH bands.'.format(
            filename, n_rest))
    missing = [p for p in ply_properties(n_coeffs) if p not in names]
    if missing:
        raise CheckpointError('{0}: properties {1} are missing.'.format(filename, ', '.join(missing)))

    def stack(*props):
        return np.stack([np.asarray(vertex[p], dtype=float) for p in props], axis=1)

    n = vertex.count
    sh = np.empty((n, n_coeffs, 3))
    sh[:, 0, :] = stack('f_dc_0', 'f_dc_1', 'f_dc_2')
    if n_rest > 0:
        rest = stack(*['f_rest_{0}'.format(i) for i in range(n_rest)])
        sh[:, 1:, :] = rest.reshape(n, 3, n_coeffs - 1).transpose(0, 2, 1)
    rotations = stack('rot_0', 'rot_1', 'rot_2', 'rot_3')
    norm = np.linalg.norm(rotations, axis=1)
    if not np.all(norm > 0):
        raise CheckpointError('{0}: rotations of vertices {1} have zero length.'.format(
            filename, np.nonzero(~(norm > 0))[0].tolist()))
    # other trainers store unnormalized quaternions; unit rows stay bit-exact
    off = np.abs(norm - 1) > 1e-6
    rotations[off] /= norm[off, None]
    return GaussianCloud(stack('x', 'y', 'z'),
                         rotations,
                         stack('scale_0', 'scale_1', 'scale_2'),
                         np.asarray(vertex['opacity'], dtype=float),
                         sh)
