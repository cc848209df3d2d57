# Licensed under GPL version 3 - see LICENSE.rst
'''Deformation of canonical Gaussians into a pose of the body.'''
from .binding import Binding, bind, knn, agent_weights, agent_weights_backward
from .mlp import NonRigidMLP
from .deformation import (DeformConfig, DeformedCloud, rigid_blend, non_rigid, deform,
                          deform_backward, canonical_view_dir, view_directions,
                          view_directions_backward)
from .avatar import Avatar
