# Licensed under GPL version 3 - see LICENSE.rst
'''Pose-guided deformation of the canonical Gaussians into a posed frame.

A Gaussian at canonical position ``x`` is first moved by the non-rigid
offsets that the MLP predicts from ``x`` and the posed position of its
agent vertex. It is then moved by a blend of the rigid transforms of its
``k`` nearest body vertices: for vertex ``v`` the transform from canonical
space to the target pose is ``T_t[v] @ inv(T_c[v])`` (column vectors),
where ``T_c`` and ``T_t`` are the skinning transforms of the canonical and
the target pose.
'''
from collections import OrderedDict

import numpy as np

from ..base import ConfigBlock
from ..math.rotations import (quat_mul, quat_mul_backward, quat_normalize,
                              quat_normalize_backward, quat2mat,
                              polar_quat, polar_quat_backward)
from ..math.utils import norm_vector, norm_vector_backward
from .binding import agent_weights, agent_weights_backward

__all__ = ['DeformConfig', 'DeformedCloud', 'rigid_blend', 'rigid_blend_backward',
           'non_rigid', 'deform', 'deform_backward', 'canonical_view_dir',
           'view_directions', 'view_directions_backward']


class DeformConfig(ConfigBlock):
    '''Settings of the deformation field.'''
    k = 3
    '''Number of body vertices each Gaussian is bound to.'''
    sigma = 0.1
    '''Width of the agent weights.'''
    non_rigid = True
    '''Use the MLP offsets. If ``False`` only the rigid blend is applied.'''
    canonical_view_dir = True
    '''Evaluate the SH colors along the view direction rotated back into
    canonical space. If ``False`` the world-space direction is used.'''

    def validate(self):
        self._check_positive('k', 'sigma')


def rigid_blend(weights, neighbors, t_c, t_t, t_c_inv=None):
    '''Blend the per-vertex canonical-to-posed transforms.

    Parameters
    ----------
    weights : np.array of shape (N, k)
        Normalized agent weights.
    neighbors : np.array of shape (N, k)
        Vertex indices.
    t_c, t_t : np.array of shape (V, 4, 4)
        Vertex transforms of the canonical and the target pose.
    t_c_inv : np.array of shape (V, 4, 4) or None
        Inverse of ``t_c`` if already known.

    Returns
    -------
    blend : np.array of shape (N, 4, 4)
        ``sum_i w_i T_t[v_i] @ inv(T_c[v_i])``
    '''
    if t_c_inv is None:
        t_c_inv = np.linalg.inv(t_c)
    per_vertex = t_t @ t_c_inv
    return np.einsum('nk,nkab->nab', weights, per_vertex[neighbors])


def rigid_blend_backward(weights, neighbors, t_c_inv, t_t, grad):
    '''Gradient of `rigid_blend`.

    Returns
    -------
    grad_weights : np.array of shape (N, k)
    grad_t_c, grad_t_t : np.array of shape (V, 4, 4)
    '''
    per_vertex = t_t @ t_c_inv
    grad_weights = np.einsum('nab,nkab->nk', grad, per_vertex[neighbors])
    acc = np.zeros_like(t_t)
    np.add.at(acc, neighbors.ravel(),
              (weights[:, :, None, None] * grad[:, None, :, :]).reshape(-1, 4, 4))
    grad_t_t = acc @ np.swapaxes(t_c_inv, -1, -2)
    grad_inv = np.swapaxes(t_t, -1, -2) @ acc
    t_inv_t = np.swapaxes(t_c_inv, -1, -2)
    grad_t_c = -t_inv_t @ grad_inv @ t_inv_t
    return grad_weights, grad_t_c, grad_t_t


def non_rigid(cloud_positions, cloud_rotations, cloud_log_scales, offsets):
    '''Apply the MLP offsets in canonical space.

    Positions and log-scales are shifted, the rotation offset is added to
    the quaternion which is then normalized.

    Returns
    -------
    positions, rotations, log_scales : np.array
    '''
    return (cloud_positions + offsets['dx'],
            quat_normalize(cloud_rotations + offsets['dr']),
            cloud_log_scales + offsets['ds'])


def canonical_view_dir(d, camera_rotation=None, c2w=None, gaussian_rotation=None):
    '''Rotate a viewing direction into the canonical frame of a Gaussian.

    ``d_canonical = R(q)^T (c2w r)^T d``

    Parameters
    ----------
    d : np.array of shape (..., 3)
        Unit direction.
    camera_rotation : np.array of shape (3, 3) or None
        ``r``; identity if ``None``.
    c2w : np.array of shape (3, 3) or (4, 4) or None
        Camera-to-world transform; only its rotation part is used.
    gaussian_rotation : np.array of shape (..., 4) or None
        Quaternion of the canonical-to-posed rotation of the Gaussian.

    Returns
    -------
    d_canonical : np.array of shape (..., 3)
    '''
    d = np.asanyarray(d, dtype=float)
    m = np.eye(3)
    if c2w is not None:
        m = np.asanyarray(c2w, dtype=float)[:3, :3] @ m
    if camera_rotation is not None:
        m = m @ np.asanyarray(camera_rotation, dtype=float)
    out = d @ m
    if gaussian_rotation is not None:
        out = np.einsum('...ba,...b->...a', quat2mat(quat_normalize(gaussian_rotation)), out)
    return out


class DeformedCloud:
    '''Gaussians in a posed frame, plus what the backward pass needs.

    Attributes
    ----------
    canonical_positions, canonical_rotations : np.array
        Canonical positions and rotations after the non-rigid offsets.
    log_scales : np.array of shape (N, 3)
        Log-scales after the non-rigid offsets (scales are not changed by
        the rigid part).
    positions : np.array of shape (N, 3)
        Posed positions.
    rotations : np.array of shape (N, 4)
        Posed rotations.
    blended_transforms : np.array of shape (N, 4, 4)
    blend_rotations : np.array of shape (N, 3, 3)
        Polar rotation factor of each blended transform.
    opacity_logits, sh_coeffs : np.array
        Not deformed.
    '''
    def __len__(self):
        return len(self.positions)


def deform(cloud, mlp, binding, body, pose_c, pose_t, config=None, posed_c=None):
    '''Deform the canonical cloud into pose ``pose_t``.

    Parameters
    ----------
    cloud : `posesplat.gaussians.GaussianCloud`
    mlp : `posesplat.deform.NonRigidMLP` or None
        ``None`` disables the non-rigid offsets.
    binding : `posesplat.deform.Binding`
    body : `posesplat.body.BodyModel`
    pose_c, pose_t : `posesplat.body.PoseState`
        Canonical and target pose; both should have the same ``beta``.
    config : `DeformConfig` or None
    posed_c : `posesplat.body.PosedBody` or None
        Forward kinematics of ``pose_c`` if already computed.

    Returns
    -------
    deformed : `DeformedCloud`
    '''
    config = config or DeformConfig()
    if len(binding) != len(cloud):
        raise ValueError('Binding has {0} rows, but the cloud has {1} Gaussians.'.format(
            len(binding), len(cloud)))
    out = DeformedCloud()
    out.cloud = cloud
    out.binding = binding
    out.body = body
    out.config = config
    out.posed_c = posed_c if posed_c is not None else body.pose(pose_c)
    out.posed_t = body.pose(pose_t)
    out.t_c_inv = np.linalg.inv(out.posed_c.vertex_transforms)
    canonical_vertices = out.posed_c.vertices
    out.weights = agent_weights(cloud.positions, binding, canonical_vertices,
                                body.skinning_weights)

    out.mlp = mlp if (mlp is not None and config.non_rigid) else None
    if out.mlp is not None:
        out.offsets, out.mlp_cache = out.mlp.forward(cloud.positions,
                                                     out.posed_t.vertices[binding.nearest])
    else:
        n = len(cloud)
        out.offsets = OrderedDict([('dx', np.zeros((n, 3))), ('dr', np.zeros((n, 4))),
                                   ('ds', np.zeros((n, 3)))])
    out.canonical_positions, out.canonical_rotations, out.log_scales = \
        non_rigid(cloud.positions, cloud.rotations, cloud.log_scales, out.offsets)

    out.blended_transforms = rigid_blend(out.weights, binding.neighbors,
                                         out.posed_c.vertex_transforms,
                                         out.posed_t.vertex_transforms, out.t_c_inv)
    d = out.blended_transforms
    out.positions = np.einsum('nab,nb->na', d[:, :3, :3], out.canonical_positions) + d[:, :3, 3]
    out.blend_quats, out.blend_rotations, out.blend_svd = polar_quat(d[:, :3, :3])
    out.rotations = quat_mul(out.blend_quats, out.canonical_rotations)
    out.opacity_logits = cloud.opacity_logits
    out.sh_coeffs = cloud.sh_coeffs
    return out


def view_directions(deformed, camera_center):
    '''Directions along which the SH colors are evaluated.

    Parameters
    ----------
    deformed : `DeformedCloud`
    camera_center : np.array of shape (3, )

    Returns
    -------
    dirs : np.array of shape (N, 3)
        Unit vectors from the camera to the Gaussians, rotated into
        canonical space unless switched off in the `DeformConfig`.
    '''
    world = norm_vector(deformed.positions - camera_center)
    if not deformed.config.canonical_view_dir:
        return world
    return np.einsum('nba,nb->na', deformed.blend_rotations, world)


def view_directions_backward(deformed, camera_center, grad):
    '''Gradient of `view_directions`.

    Returns
    -------
    grad_positions : np.array of shape (N, 3)
    grad_blend_rotations : np.array of shape (N, 3, 3) or None
    '''
    diff = deformed.positions - camera_center
    if not deformed.config.canonical_view_dir:
        return norm_vector_backward(diff, grad), None
    world = norm_vector(diff)
    grad_world = np.einsum('nab,nb->na', deformed.blend_rotations, grad)
    grad_rot = world[:, :, None] * grad[:, None, :]
    return norm_vector_backward(diff, grad_world), grad_rot


def deform_backward(deformed, grad_positions=None, grad_rotations=None,
                    grad_log_scales=None, grad_blend_rotations=None, mlp_grads=True):
    '''Propagate gradients from the posed Gaussians back to the parameters.

    Parameters
    ----------
    deformed : `DeformedCloud`
    grad_positions : np.array of shape (N, 3) or None
    grad_rotations : np.array of shape (N, 4) or None
    grad_log_scales : np.array of shape (N, 3) or None
    grad_blend_rotations : np.array of shape (N, 3, 3) or None
        Gradient with respect to ``deformed.blend_rotations``, e.g. from
        `view_directions_backward`.
    mlp_grads : bool
        If ``False``, the gradient for the MLP weights is not computed (the
        gradient that flows through the MLP into the inputs still is).

    Returns
    -------
    grads : dict
        ``positions``, ``rotations``, ``log_scales`` (canonical cloud),
        ``theta``, ``translation`` (target pose), ``beta``, and ``mlp``
        (dict of weight gradients or ``None``).
    '''
    n = len(deformed)
    zeros = lambda *shape: np.zeros(shape)
    g_x = zeros(n, 3) if grad_positions is None else grad_positions
    g_r = zeros(n, 4) if grad_rotations is None else grad_rotations
    g_s = zeros(n, 3) if grad_log_scales is None else grad_log_scales
    cloud = deformed.cloud
    binding = deformed.binding
    body = deformed.body
    d = deformed.blended_transforms

    grad_d = np.zeros_like(d)
    grad_d[:, :3, :3] = g_x[:, :, None] * deformed.canonical_positions[:, None, :]
    grad_d[:, :3, 3] = g_x
    g_xc = np.einsum('nba,nb->na', d[:, :3, :3], g_x)
    g_q, g_rc = quat_mul_backward(deformed.blend_quats, deformed.canonical_rotations, g_r)
    grad_d[:, :3, :3] += polar_quat_backward(deformed.blend_quats, deformed.blend_rotations,
                                             deformed.blend_svd, g_q, grad_blend_rotations)

    # non-rigid offsets
    g_rsum = quat_normalize_backward(cloud.rotations + deformed.offsets['dr'], g_rc)
    grads = {'positions': g_xc.copy(), 'rotations': g_rsum, 'log_scales': g_s.copy()}

    g_w, g_tc, g_tt = rigid_blend_backward(deformed.weights, binding.neighbors,
                                           deformed.t_c_inv, deformed.posed_t.vertex_transforms,
                                           grad_d)
    g_pos_w, g_vc = agent_weights_backward(cloud.positions, binding, deformed.posed_c.vertices,
                                           body.skinning_weights, g_w)
    grads['positions'] += g_pos_w

    g_vt = np.zeros((body.n_vertices, 3))
    grads['mlp'] = None
    if deformed.mlp is not None:
        mlp_w, g_x_mlp, g_v_mlp = deformed.mlp.backward(
            deformed.mlp_cache, {'dx': g_xc, 'dr': g_rsum, 'ds': g_s})
        grads['positions'] += g_x_mlp
        np.add.at(g_vt, binding.nearest, g_v_mlp)
        if mlp_grads:
            grads['mlp'] = mlp_w

    theta, trans, beta_t = deformed.posed_t.backward(g_tt, g_vt)
    _, _, beta_c = deformed.posed_c.backward(g_tc, g_vc)
    grads['theta'] = theta
    grads['translation'] = trans
    grads['beta'] = beta_t + beta_c
    return grads
