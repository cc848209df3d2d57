# Licensed under GPL version 3 - see LICENSE.rst
'''Articulated body models that guide the deformation of the Gaussians.'''
from .model import BodyModel, PoseState, PosedBody
from .procedural import procedural_body, star_pose
