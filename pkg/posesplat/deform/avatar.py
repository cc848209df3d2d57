# Licensed under GPL version 3 - see LICENSE.rst
import numpy as np

from ..gaussians import GaussianCloud
from ..body import PoseState
from .binding import bind
from .mlp import NonRigidMLP
from .deformation import DeformConfig, deform, deform_backward

__all__ = ['Avatar']


class Avatar:
    '''Canonical Gaussians attached to a body model.

    This bundles everything that is needed to put the Gaussians into a
    pose: the cloud, the non-rigid MLP, the binding to the body vertices
    and the global shape ``beta``.

    Parameters
    ----------
    body : `posesplat.body.BodyModel`
    cloud : `posesplat.gaussians.GaussianCloud`
    mlp : `posesplat.deform.NonRigidMLP` or None
    beta : np.array of shape (S, ) or None
    config : `posesplat.deform.DeformConfig` or None
    binding : `posesplat.deform.Binding` or None
        Computed from the canonical vertices if not given.
    '''
    def __init__(self, body, cloud, mlp=None, beta=None, config=None, binding=None):
        self.body = body
        self.cloud = cloud
        self.mlp = mlp
        self.beta = np.zeros(body.n_shape) if beta is None else np.array(beta, dtype=float)
        self.config = config or DeformConfig()
        self.binding = binding if binding is not None else self.bind(cloud.positions)

    @classmethod
    def from_body(cls, body, sh_degree=3, colors=0.5, opacity=0.1, mlp=None, config=None,
                  beta=None):
        '''One Gaussian at each vertex of the body in the canonical pose.

        See `posesplat.gaussians.GaussianCloud.from_points` for the
        initial parameters.
        '''
        beta = np.zeros(body.n_shape) if beta is None else beta
        verts = body.posed_vertices(body.canonical_state(beta))
        cloud = GaussianCloud.from_points(verts, sh_degree=sh_degree, colors=colors,
                                          opacity=opacity)
        return cls(body, cloud, mlp=mlp if mlp is not None else NonRigidMLP(),
                   beta=beta, config=config)

    def canonical_state(self):
        return self.body.canonical_state(self.beta)

    def canonical_vertices(self):
        return self.body.posed_vertices(self.canonical_state())

    def bind(self, positions):
        '''Binding of ``positions`` against the current canonical vertices.'''
        return bind(positions, self.canonical_vertices(), k=self.config.k, sigma=self.config.sigma)

    def target_state(self, pose):
        '''``pose`` with the shape of this avatar.'''
        return PoseState(pose.theta, pose.translation, self.beta)

    def deform(self, pose, posed_c=None):
        '''Put the Gaussians into ``pose``.

        Parameters
        ----------
        pose : `posesplat.body.PoseState`
            Its ``beta`` is replaced by the avatar's.
        posed_c : `posesplat.body.PosedBody` or None
            Forward kinematics of the canonical pose, to share between
            frames while ``beta`` does not change.

        Returns
        -------
        deformed : `posesplat.deform.DeformedCloud`
        '''
        return deform(self.cloud, self.mlp, self.binding, self.body, self.canonical_state(),
                      self.target_state(pose), config=self.config, posed_c=posed_c)

    def backward(self, deformed, **kwargs):
        '''Same as `posesplat.deform.deform_backward`.'''
        return deform_backward(deformed, **kwargs)
