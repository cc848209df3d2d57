# Licensed under GPL version 3 - see LICENSE.rst
from .image import l1_loss, ssim, ssim_map, ssim_loss, psnr, mse
from .rigid import RigidPriorGraph, rot_loss, iso_loss, relative_rotations
from .objective import LossConfig, LossParts, total_loss, compute_loss
