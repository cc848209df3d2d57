# Licensed under GPL version 3 - see LICENSE.rst
'''Articulated body model with linear blend skinning.

All transforms are 4x4 homogeneous matrices that act on column vectors, so
``T @ e2h(x, 1)`` moves point ``x``. Joint ``j`` is rotated about its rest
position by the axis-angle vector ``theta[j]`` relative to its parent;
joint 0 is the root and additionally carries the global translation.
'''
import numpy as np

from ..utils import BodyModelError
from ..math.rotations import rotvec2mat, rotvec2mat_jacobian, wrap_rotvec
from ..math.utils import apply_affine, mat2aff

__all__ = ['BodyModel', 'PoseState', 'PosedBody']


class PoseState:
    '''Pose and shape of a body.

    Parameters
    ----------
    theta : np.array of shape (J, 3)
        Axis-angle rotation of each joint relative to its parent, in
        radians. Vectors longer than pi are wrapped to the equivalent
        shorter vector.
    translation : np.array of shape (3, )
        Global translation applied to the root joint.
    beta : np.array of shape (S, )
        Shape coefficients. Empty (the default) means zeros for every
        shape direction of the model.
    '''
    def __init__(self, theta, translation=None, beta=None):
        theta = np.array(theta, dtype=float)
        if theta.ndim == 1:
            theta = theta.reshape(-1, 3)
        self.theta = wrap_rotvec(theta)
        self.translation = np.zeros(3) if translation is None else \
            np.array(translation, dtype=float).reshape(3)
        self.beta = np.zeros(0) if beta is None else np.array(beta, dtype=float).reshape(-1)
        for name in ['theta', 'translation', 'beta']:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError('PoseState {0} must be finite.'.format(name))

    @classmethod
    def rest(cls, n_joints, n_shape=0):
        return cls(np.zeros((n_joints, 3)), np.zeros(3), np.zeros(n_shape))

    def copy(self):
        return PoseState(self.theta.copy(), self.translation.copy(), self.beta.copy())

    def with_beta(self, beta):
        '''Same pose with different shape coefficients.'''
        return PoseState(self.theta, self.translation, beta)

    def __repr__(self):
        return 'PoseState(J={0}, translation={1}, beta={2})'.format(
            len(self.theta), self.translation, self.beta)


class BodyModel:
    '''Skinned template mesh with a kinematic tree.

    Parameters
    ----------
    template_vertices : np.array of shape (V, 3)
        Vertices in the rest pose (``theta = 0``).
    faces : np.array of shape (F, 3)
        Vertex indices of the triangles. Only used for export and display.
    joint_rest_positions : np.array of shape (J, 3)
    parents : np.array of shape (J, )
        Index of the parent of each joint; ``-1`` for the root, which must
        be joint 0. Every parent must precede its children.
    skinning_weights : np.array of shape (V, J)
        Non-negative, each row sums to 1.
    shape_dirs : np.array of shape (V, 3, S) or ``None``
        Linear shape blend shapes.
    joint_regressor : np.array of shape (J, V) or ``None``
        If given, the joint positions move with the shape: the joint offsets
        are ``joint_regressor @ (shape offsets of the vertices)``.
    canonical_pose : np.array of shape (J, 3) or ``None``
        Pose of the canonical space in which Gaussians are stored (e.g. a
        star pose). Defaults to the rest pose.
    joint_names : list of str or ``None``
    '''
    def __init__(self, template_vertices, faces, joint_rest_positions, parents,
                 skinning_weights, shape_dirs=None, joint_regressor=None,
                 canonical_pose=None, joint_names=None):
        self.template_vertices = np.array(template_vertices, dtype=float)
        self.faces = np.array(faces, dtype=int).reshape(-1, 3)
        self.joint_rest_positions = np.array(joint_rest_positions, dtype=float)
        self.parents = np.array(parents, dtype=int)
        self.skinning_weights = np.array(skinning_weights, dtype=float)
        n_vert = len(self.template_vertices)
        n_joint = len(self.parents)
        self.shape_dirs = np.zeros((n_vert, 3, 0)) if shape_dirs is None else \
            np.array(shape_dirs, dtype=float)
        self.joint_regressor = None if joint_regressor is None else \
            np.array(joint_regressor, dtype=float)
        self.canonical_pose = np.zeros((n_joint, 3)) if canonical_pose is None else \
            np.array(canonical_pose, dtype=float).reshape(n_joint, 3)
        self.joint_names = ['joint{0}'.format(i) for i in range(n_joint)] \
            if joint_names is None else list(joint_names)
        self.validate()

    def validate(self):
        '''Check array shapes, skinning weights and the kinematic tree.

        Raises
        ------
        posesplat.utils.BodyModelError
        '''
        v = self.n_vertices
        j = self.n_joints
        if self.template_vertices.shape != (v, 3):
            raise BodyModelError('template_vertices must have shape (V, 3).')
        if self.joint_rest_positions.shape != (j, 3):
            raise BodyModelError('joint_rest_positions must have shape (J, 3) with J={0}.'.format(j))
        if self.skinning_weights.shape != (v, j):
            raise BodyModelError('skinning_weights must have shape (V, J) = ({0}, {1}), not {2}.'.format(
                v, j, self.skinning_weights.shape))
        if np.any(self.skinning_weights < 0):
            raise BodyModelError('skinning_weights must be non-negative.')
        if not np.allclose(self.skinning_weights.sum(axis=1), 1., atol=1e-5):
            raise BodyModelError('Each row of skinning_weights must sum to 1.')
        if self.shape_dirs.ndim != 3 or self.shape_dirs.shape[:2] != (v, 3):
            raise BodyModelError('shape_dirs must have shape (V, 3, S).')
        if (self.joint_regressor is not None) and (self.joint_regressor.shape != (j, v)):
            raise BodyModelError('joint_regressor must have shape (J, V).')
        if len(self.faces) and ((self.faces.min() < 0) or (self.faces.max() >= v)):
            raise BodyModelError('faces refer to vertices that do not exist.')
        if j == 0 or self.parents[0] != -1:
            raise BodyModelError('Joint 0 must be the root (parent -1).')
        for i in range(1, j):
            if not (0 <= self.parents[i] < i):
                raise BodyModelError('Joint {0} has parent {1}. Joints must be ordered so that '
                                     'every parent precedes its children.'.format(i, self.parents[i]))
        if len(self.joint_names) != j:
            raise BodyModelError('There must be one name per joint.')

    @property
    def n_vertices(self):
        return len(self.template_vertices)

    @property
    def n_joints(self):
        return len(self.parents)

    @property
    def n_shape(self):
        return self.shape_dirs.shape[2]

    def rest_pose(self):
        return PoseState.rest(self.n_joints, self.n_shape)

    def canonical_state(self, beta=None):
        '''`PoseState` of the canonical space (no translation).'''
        return PoseState(self.canonical_pose, np.zeros(3),
                         np.zeros(self.n_shape) if beta is None else beta)

    def _check_beta(self, beta):
        '''Shape coefficients as a vector of length ``n_shape``; empty means all zero.'''
        beta = np.asanyarray(beta, dtype=float).reshape(-1)
        if len(beta) == 0:
            return np.zeros(self.n_shape)
        if len(beta) != self.n_shape:
            raise BodyModelError('beta has length {0}, but the model has {1} shape directions.'.format(
                len(beta), self.n_shape))
        return beta

    def shaped_template(self, beta):
        '''Template vertices with the shape blend shapes applied.

        Parameters
        ----------
        beta : np.array of shape (S, )

        Returns
        -------
        vertices : np.array of shape (V, 3)
        '''
        beta = self._check_beta(beta)
        return self.template_vertices + self.shape_dirs @ beta

    def joint_positions(self, beta):
        '''Rest positions of the joints for shape ``beta``.'''
        beta = self._check_beta(beta)
        if self.joint_regressor is None or self.n_shape == 0:
            return self.joint_rest_positions.copy()
        return self.joint_rest_positions + self.joint_regressor @ (self.shape_dirs @ beta)

    def pose(self, pose):
        '''Run forward kinematics and skinning.

        Parameters
        ----------
        pose : `PoseState`

        Returns
        -------
        posed : `PosedBody`
        '''
        return PosedBody(self, pose)

    def vertex_transforms(self, pose):
        '''Per-vertex transforms of the rest pose into ``pose``.

        Returns
        -------
        transforms : np.array of shape (V, 4, 4)
            Linear blend of the joint transforms; the rotation part is not
            re-orthonormalized.
        '''
        return self.pose(pose).vertex_transforms

    def posed_vertices(self, pose):
        '''Vertex positions in ``pose``.'''
        return self.pose(pose).vertices


class PosedBody:
    '''Forward kinematics of a `BodyModel` in one pose, kept for the backward pass.

    Attributes
    ----------
    shaped : np.array of shape (V, 3)
        Template with shape blend shapes.
    joints : np.array of shape (J, 3)
        Joint rest positions for this shape.
    local : np.array of shape (J, 4, 4)
        Transform of each joint relative to its parent.
    world : np.array of shape (J, 4, 4)
        Joint frames in world coordinates.
    joint_transforms : np.array of shape (J, 4, 4)
        Transform of the rest pose into the posed configuration for
        each joint.
    vertex_transforms : np.array of shape (V, 4, 4)
    vertices : np.array of shape (V, 3)
    '''
    def __init__(self, model, pose):
        self.model = model
        self.pose = pose
        if pose.theta.shape != (model.n_joints, 3):
            raise BodyModelError('theta must have shape ({0}, 3), not {1}.'.format(
                model.n_joints, pose.theta.shape))
        self.shaped = model.shaped_template(pose.beta)
        self.joints = model.joint_positions(pose.beta)
        parents = model.parents
        n = model.n_joints
        self.rotations = rotvec2mat(pose.theta)
        self.local = mat2aff(self.rotations)
        self.local[0, :3, 3] = self.joints[0] + pose.translation
        self.local[1:, :3, 3] = self.joints[1:] - self.joints[parents[1:]]
        self.world = np.empty_like(self.local)
        self.world[0] = self.local[0]
        for j in range(1, n):
            self.world[j] = self.world[parents[j]] @ self.local[j]
        self.joint_transforms = self.world.copy()
        self.joint_transforms[:, :3, 3] -= np.einsum('jab,jb->ja', self.world[:, :3, :3], self.joints)
        self.vertex_transforms = np.einsum('vj,jab->vab', model.skinning_weights,
                                           self.joint_transforms)
        self.vertices = apply_affine(self.vertex_transforms, self.shaped)

    def backward(self, grad_vertex_transforms=None, grad_vertices=None):
        '''Gradients with respect to the pose and shape parameters.

        Parameters
        ----------
        grad_vertex_transforms : np.array of shape (V, 4, 4) or ``None``
            Gradient of the loss with respect to `vertex_transforms`. The
            last row is ignored since it is constant.
        grad_vertices : np.array of shape (V, 3) or ``None``
            Gradient of the loss with respect to `vertices`.

        Returns
        -------
        grad_theta : np.array of shape (J, 3)
        grad_translation : np.array of shape (3, )
        grad_beta : np.array of shape (S, )
        '''
        model = self.model
        n_vert = model.n_vertices
        n = model.n_joints
        g_t = np.zeros((n_vert, 4, 4)) if grad_vertex_transforms is None else \
            np.array(grad_vertex_transforms, dtype=float)
        g_t[:, 3, :] = 0.
        g_shaped = np.zeros((n_vert, 3))
        if grad_vertices is not None:
            g_t[:, :3, :3] += grad_vertices[:, :, None] * self.shaped[:, None, :]
            g_t[:, :3, 3] += grad_vertices
            g_shaped += np.einsum('vba,vb->va', self.vertex_transforms[:, :3, :3], grad_vertices)

        g_g = np.einsum('vj,vab->jab', model.skinning_weights, g_t)
        # joint_transforms = world @ [I, -joints]
        g_world = g_g.copy()
        g_world[:, :3, :3] -= g_g[:, :3, 3, None] * self.joints[:, None, :]
        g_joints = -np.einsum('jba,jb->ja', self.world[:, :3, :3], g_g[:, :3, 3])

        g_local = np.zeros_like(self.local)
        parents = model.parents
        for j in range(n - 1, 0, -1):
            p = parents[j]
            g_world[p] += g_world[j] @ self.local[j].T
            g_local[j] = self.world[p].T @ g_world[j]
        g_local[0] = g_world[0]

        jac = rotvec2mat_jacobian(self.pose.theta)
        grad_theta = np.einsum('jkab,jab->jk', jac, g_local[:, :3, :3])
        g_trans_local = g_local[:, :3, 3]
        grad_translation = g_trans_local[0].copy()
        g_joints[0] += g_trans_local[0]
        g_joints[1:] += g_trans_local[1:]
        np.subtract.at(g_joints, parents[1:], g_trans_local[1:])

        if model.n_shape == 0:
            return grad_theta, grad_translation, np.zeros(0)
        if model.joint_regressor is not None:
            g_shaped += model.joint_regressor.T @ g_joints
        grad_beta = np.einsum('vks,vk->s', model.shape_dirs, g_shaped)
        return grad_theta, grad_translation, grad_beta
