# Licensed under GPL version 3 - see LICENSE.rst
'''File formats, synthetic scenes and evaluation.'''
from .utils import atomic_path, read_json, write_json
from .bodyfile import read_body, write_body
from .images import read_image, write_image, read_mask, write_mask, quantize, resize_image
from .dataset import (Frame, SceneDataset, read_dataset, read_poses, write_poses)
from .checkpoint import Checkpoint, read_checkpoint
from .ply import read_ply, write_ply
from .synth import synth_dataset, truth_avatar, pose_trajectory, orbit_camera
from .evaluate import evaluate, write_report
