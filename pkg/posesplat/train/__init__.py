# Licensed under GPL version 3 - see LICENSE.rst
'''Optimization of an avatar against posed images.'''
from .optimizer import Adam, ParameterGroup, expon_lr
from .densify import (DensifyConfig, DensifyResult, GradientStats, densify_and_prune,
                      split_with_scale, reset_opacity)
from .trainer import (TrainSchedule, LearningRates, Trainer, TrainResult, train,
                      refine_body_params, frame_target)
