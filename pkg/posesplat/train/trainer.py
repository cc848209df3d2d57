# Licensed under GPL version 3 - see LICENSE.rst
'''The optimization loop.

Each step picks one training frame, puts the canonical Gaussians into the
pose of that frame, renders them, compares the image with the frame and
propagates the gradient back through the renderer and the deformation
field to the canonical Gaussians, the MLP weights and the body
parameters.
'''
import time
from collections import OrderedDict

import numpy as np
from astropy import log
from astropy.table import Table

from ..base import ConfigBlock
from ..body import PoseState
from ..deform import Binding, view_directions_backward
from ..loss import LossConfig, RigidPriorGraph, compute_loss, psnr
from ..math.rotations import wrap_rotvec
from ..render import render_avatar
from ..utils import DatasetError, NonFiniteError, PoseSplatError
from .densify import (DensifyConfig, GradientStats, densify_and_prune, split_with_scale,
                      reset_opacity)
from .optimizer import Adam, expon_lr

__all__ = ['TrainSchedule', 'LearningRates', 'Trainer', 'TrainResult', 'train',
           'refine_body_params', 'frame_target']

CLOUD_GROUPS = ['positions', 'rotations', 'log_scales', 'opacity_logits', 'sh_coeffs']

HISTORY_COLUMNS = ['step', 'frame', 'loss', 'l1', 'ssim', 'rot', 'iso', 'psnr',
                   'n_gaussians', 'lr_positions', 'elapsed']


class TrainSchedule(ConfigBlock):
    '''Length of a run and what is optimized when.'''
    total_steps = 2000
    non_rigid_warmup = 0.1
    '''Fraction of ``total_steps`` during which the MLP weights are frozen.'''
    refine_body = True
    '''Optimize the per-frame pose and the global shape together with the Gaussians.'''
    sample_frames = True
    '''Pick frames at random. If ``False`` the frames are used in turn.'''
    log_interval = 100
    seed = 0

    def validate(self):
        self._check_positive('total_steps', strict=False)
        self._check_positive('log_interval')
        if not (0 <= self.non_rigid_warmup <= 1):
            raise ValueError('non_rigid_warmup must be in [0, 1], got {0}.'.format(
                self.non_rigid_warmup))


class LearningRates(ConfigBlock):
    '''Adam learning rates of all parameter groups.'''
    positions = 1.6e-4
    positions_final = 1.6e-6
    '''The position rate decays log-linearly to this value over the run.'''
    rotations = 1e-3
    log_scales = 5e-3
    opacity_logits = 5e-2
    sh_coeffs = 2.5e-3
    '''Rate of the constant SH band; higher bands use 1/20 of it.'''
    mlp = 2e-3
    body = 2e-3
    body_max_step = 0.05
    '''Largest change of a pose angle (rad) or shape coefficient in one step.'''

    def validate(self):
        self._check_positive(*self.setting_names())

    def sh_rates(self, n_coeffs):
        lr = np.full((1, n_coeffs, 1), self.sh_coeffs / 20.)
        lr[0, 0, 0] = self.sh_coeffs
        return lr


def frame_target(frame, background):
    '''Image of ``frame`` composited over ``background`` with its mask.

    Frames without a mask are returned unchanged.
    '''
    image = np.asanyarray(frame.image, dtype=float)
    mask = getattr(frame, 'mask', None)
    if mask is None:
        return image
    mask = np.asanyarray(mask, dtype=float)[:, :, None]
    return image * mask + np.asanyarray(background, dtype=float) * (1 - mask)


def refine_body_params(optimizer, frame_index, grads):
    '''Adam step for the pose of one frame and for the global shape.

    Parameters
    ----------
    optimizer : `posesplat.train.Adam`
        Must have groups ``theta/<frame_index>``, ``translation/<frame_index>``
        and, for bodies with shape coefficients, ``beta``.
    frame_index : int
    grads : dict
        Output of `posesplat.deform.deform_backward`.

    The pose angles are wrapped to at most pi after the update.
    '''
    body_grads = OrderedDict([('theta/{0}'.format(frame_index), grads['theta']),
                              ('translation/{0}'.format(frame_index), grads['translation'])])
    if 'beta' in optimizer:
        body_grads['beta'] = grads['beta']
    optimizer.step(body_grads)
    theta = optimizer.groups['theta/{0}'.format(frame_index)].param
    theta[...] = wrap_rotvec(theta)


class TrainResult:
    '''What a run produced.

    Attributes
    ----------
    avatar : `posesplat.deform.Avatar`
        With the optimized cloud, MLP, binding and shape.
    poses : list of `posesplat.body.PoseState`
        Refined pose of every training frame.
    history : `astropy.table.Table`
    config : OrderedDict
        ``describe()`` of every configuration block.
    step : int
    '''
    def __init__(self, avatar, poses, history, config, step):
        self.avatar = avatar
        self.poses = poses
        self.history = history
        self.config = config
        self.step = step


def _grad(grads, key, like):
    g = grads.get(key)
    return np.zeros_like(like) if g is None else g


class Trainer:
    '''Optimize an avatar against a set of posed frames.

    Parameters
    ----------
    avatar : `posesplat.deform.Avatar`
        Changed in place.
    frames : list
        Objects with the attributes ``image`` (H, W, 3), ``camera``
        (`posesplat.render.Camera`), ``pose`` (`posesplat.body.PoseState`)
        and optionally ``mask`` (H, W).
    background : np.array of shape (3, )
    loss : `posesplat.loss.LossConfig`
    densify : `posesplat.train.DensifyConfig`
    schedule : `TrainSchedule`
    learning_rates : `LearningRates`
    render_kwargs : dict
        Passed on to `posesplat.render.render` (e.g. ``tile_size``).
    postprocess_steps : list of callables
        Called with the trainer as argument after every step.
    '''
    def __init__(self, avatar, frames, background=(0., 0., 0.), loss=None, densify=None,
                 schedule=None, learning_rates=None, render_kwargs=None, postprocess_steps=None):
        self.avatar = avatar
        self.frames = list(frames)
        if len(self.frames) == 0:
            raise DatasetError('Need at least one training frame.')
        self.background = np.broadcast_to(np.asanyarray(background, dtype=float), (3, )).copy()
        self.loss_config = loss or LossConfig()
        self.densify_config = densify or DensifyConfig()
        self.schedule = schedule or TrainSchedule()
        self.learning_rates = learning_rates or LearningRates()
        self.render_kwargs = render_kwargs or {}
        self.postprocess_steps = postprocess_steps or []
        for p in self.postprocess_steps:
            if not callable(p):
                raise ValueError('{0} is not callable.'.format(p))

        n_joints = avatar.body.n_joints
        self.poses = []
        self.targets = []
        for i, f in enumerate(self.frames):
            if f.pose.theta.shape != (n_joints, 3):
                raise DatasetError('Frame {0}: pose has {1} joints, the body has {2}.'.format(
                    i, len(f.pose.theta), n_joints))
            if f.image.shape != (f.camera.height, f.camera.width, 3):
                raise DatasetError('Frame {0}: image has shape {1}, the camera needs {2}.'.format(
                    i, f.image.shape, (f.camera.height, f.camera.width, 3)))
            self.poses.append(PoseState(f.pose.theta.copy(), f.pose.translation.copy(),
                                        avatar.beta))
            self.targets.append(frame_target(f, self.background))

        self.rng = np.random.default_rng(self.schedule.seed)
        self.extent = avatar.cloud.bbox_diagonal()
        self.epsilon_scale = self.densify_config.epsilon_scale * self.extent
        self.step = 0
        self._rows = []
        self._start = time.perf_counter()
        self.optimizer = Adam()
        self._add_groups()
        self._rebuild_graph()
        self.stats = GradientStats(len(avatar.cloud))

    def _add_groups(self):
        lr = self.learning_rates
        cloud = self.avatar.cloud
        for name in CLOUD_GROUPS:
            rate = lr.sh_rates(cloud.sh_coeffs.shape[1]) if name == 'sh_coeffs' else getattr(lr, name)
            self.optimizer.add_group(name, getattr(cloud, name), rate,
                                     normalize=(name == 'rotations'))
        if self.avatar.mlp is not None:
            for name, value in self.avatar.mlp.params.items():
                self.optimizer.add_group('mlp/' + name, value, lr.mlp)
        if self.schedule.refine_body:
            for i, pose in enumerate(self.poses):
                self.optimizer.add_group('theta/{0}'.format(i), pose.theta, lr.body,
                                         max_step=lr.body_max_step)
                self.optimizer.add_group('translation/{0}'.format(i), pose.translation, lr.body,
                                         max_step=lr.body_max_step)
            if self.avatar.beta.size > 0:
                self.optimizer.add_group('beta', self.avatar.beta, lr.body,
                                         max_step=lr.body_max_step)

    def _rebuild_graph(self):
        self.graph = RigidPriorGraph.build(self.avatar.cloud.positions, k=self.loss_config.k,
                                           lambda_w=self.loss_config.lambda_w)

    @property
    def warmup_steps(self):
        return int(np.ceil(self.schedule.non_rigid_warmup * self.schedule.total_steps))

    def next_frame(self):
        if self.schedule.sample_frames:
            return int(self.rng.integers(len(self.frames)))
        return self.step % len(self.frames)

    def forward(self, index):
        '''Deform and render the avatar for frame ``index``.

        Returns
        -------
        deformed : `posesplat.deform.DeformedCloud`
        dirs : np.array of shape (N, 3)
            View directions used for the SH colors.
        output : `posesplat.render.RenderOutput`
        '''
        return render_avatar(self.avatar, self.poses[index], self.frames[index].camera,
                             background=self.background, **self.render_kwargs)

    def loss_and_grads(self, index):
        '''Training objective for frame ``index`` and its gradients.

        The image gradient is propagated through the renderer, the view
        directions of the SH colors, the deformation field and the
        forward kinematics. The rigidity terms contribute to the canonical
        and to the observed Gaussians.

        Returns
        -------
        loss : float
        parts : `posesplat.loss.LossParts`
        grads : OrderedDict
            Gradients of the cloud parameter groups, of the MLP weights as
            ``mlp/<name>`` (only after the warm-up) and of ``theta``,
            ``translation`` and ``beta``.
        output : `posesplat.render.RenderOutput`
        densify_stat : np.array of shape (N, )
            Screen-space gradient norm of each Gaussian.

        Raises
        ------
        posesplat.utils.NonFiniteError
            If the loss is NaN or infinite.
        '''
        cloud = self.avatar.cloud
        deformed, dirs, output = self.forward(index)
        loss, grads, parts = compute_loss(output.image, self.targets[index], self.loss_config,
                                          self.graph, q_c=cloud.rotations, q_o=deformed.rotations,
                                          x_c=cloud.positions, x_o=deformed.positions)
        if not np.isfinite(loss):
            diagnostics = OrderedDict([('step', self.step), ('frame', index),
                                       ('n_gaussians', len(cloud))])
            diagnostics.update(parts.scalars())
            raise NonFiniteError('Loss is not finite at step {0} (frame {1}).'.format(
                self.step, index), diagnostics)

        rgrads = output.backward(grads['image'])
        g_dir_pos, g_blend = view_directions_backward(deformed, self.frames[index].camera.center,
                                                      rgrads['sh_dirs'])
        g_pos = rgrads['positions'] + g_dir_pos + _grad(grads, 'positions_observed', g_dir_pos)
        g_rot = rgrads['rotations'] + _grad(grads, 'rotations_observed', rgrads['rotations'])
        dgrads = self.avatar.backward(deformed, grad_positions=g_pos, grad_rotations=g_rot,
                                      grad_log_scales=rgrads['log_scales'],
                                      grad_blend_rotations=g_blend,
                                      mlp_grads=self.step >= self.warmup_steps)

        step_grads = OrderedDict()
        step_grads['positions'] = dgrads['positions'] + _grad(grads, 'positions_canonical',
                                                              cloud.positions)
        step_grads['rotations'] = dgrads['rotations'] + _grad(grads, 'rotations_canonical',
                                                              cloud.rotations)
        step_grads['log_scales'] = dgrads['log_scales']
        step_grads['opacity_logits'] = rgrads['opacity_logits']
        step_grads['sh_coeffs'] = rgrads['sh_coeffs']
        if dgrads['mlp'] is not None:
            for name, g in dgrads['mlp'].items():
                step_grads['mlp/' + name] = g
        for name in ['theta', 'translation', 'beta']:
            step_grads[name] = dgrads[name]
        return loss, parts, step_grads, output, rgrads['densify_stat']

    def train_step(self):
        '''Run one optimization step and the densification that is due after it.

        Returns
        -------
        loss : float
        parts : `posesplat.loss.LossParts`
        '''
        index = self.next_frame()
        loss, parts, grads, output, densify_stat = self.loss_and_grads(index)
        body_grads = OrderedDict((name, grads.pop(name))
                                 for name in ['theta', 'translation', 'beta'])
        lr = self.learning_rates
        self.optimizer.set_lr('positions', expon_lr(self.step, lr.positions, lr.positions_final,
                                                    self.schedule.total_steps))
        self.optimizer.step(grads)
        if self.schedule.refine_body:
            refine_body_params(self.optimizer, index, body_grads)
        self.stats.add(densify_stat, output.visible)

        self.step += 1
        if (self.step % self.schedule.log_interval == 0) or (self.step == self.schedule.total_steps):
            self._record(index, loss, parts, psnr(output.image, self.targets[index]))
        self._maintain()
        for p in self.postprocess_steps:
            p(self)
        return loss, parts

    def _record(self, index, loss, parts, value):
        scalars = parts.scalars()
        row = OrderedDict([('step', self.step), ('frame', index), ('loss', loss)])
        for name in ['l1', 'ssim', 'rot', 'iso']:
            row[name] = scalars.get(name, 0.)
        row['psnr'] = value
        row['n_gaussians'] = len(self.avatar.cloud)
        row['lr_positions'] = self.optimizer.groups['positions'].lr
        row['elapsed'] = time.perf_counter() - self._start
        self._rows.append(row)
        log.info('Step {0}/{1}: loss {2:.5f}, PSNR {3:.2f} dB, {4} Gaussians.'.format(
            self.step, self.schedule.total_steps, loss, value, row['n_gaussians']))

    def _maintain(self):
        config = self.densify_config
        if config.is_densify_step(self.step):
            self.densify()
        if (self.step % config.opacity_reset_interval == 0) and (self.step <= config.densify_until):
            reset_opacity(self.avatar.cloud)
            self.optimizer.reset_moments('opacity_logits')
            log.info('Step {0}: opacity reset.'.format(self.step))

    def densify(self):
        '''Densify, prune and split-with-scale; then rebuild everything that depends on the rows.'''
        result = densify_and_prune(self.avatar.cloud, self.stats.mean(), self.densify_config,
                                   self.extent, self.rng)
        if self.densify_config.split_with_scale:
            result = result.then(split_with_scale(result.cloud, self.epsilon_scale))
        self.apply_densify(result)
        return result

    def apply_densify(self, result):
        '''Replace the cloud by ``result.cloud``.

        Optimizer moments follow their rows, rows that continue an old
        Gaussian keep its binding and new rows are bound to their nearest
        canonical vertices.
        '''
        avatar = self.avatar
        old = avatar.binding
        new = result.cloud
        for name, param in new.parameters().items():
            self.optimizer.remap_rows(name, param, result.source)
        kept = result.source >= 0
        neighbors = np.empty((len(new), old.k), dtype=int)
        neighbors[kept] = old.neighbors[result.source[kept]]
        if (~kept).any():
            neighbors[~kept] = avatar.bind(new.positions[~kept]).neighbors
        avatar.cloud = new
        avatar.binding = Binding(neighbors, old.sigma)
        self._rebuild_graph()
        self.stats = GradientStats(len(new))
        if len(avatar.binding) != len(new):
            raise PoseSplatError('Binding has {0} rows after densification, the cloud {1}.'.format(
                len(avatar.binding), len(new)))
        self.graph.check(len(new))
        log.info('Step {0}: {1} Gaussians ({2}).'.format(
            self.step, len(new), ', '.join('{0} {1}'.format(v, k) for k, v in result.counts.items())))

    @property
    def history(self):
        '''Logged steps as an `astropy.table.Table`.'''
        if len(self._rows) == 0:
            tab = Table(names=HISTORY_COLUMNS,
                        dtype=[int, int] + [float] * 6 + [int, float, float])
        else:
            tab = Table(rows=[list(r.values()) for r in self._rows], names=HISTORY_COLUMNS)
        tab.meta['SEED'] = self.schedule.seed
        tab.meta['NFRAMES'] = len(self.frames)
        tab.meta['NSTEPS'] = self.schedule.total_steps
        return tab

    def describe(self):
        return OrderedDict([('loss', self.loss_config.describe()),
                            ('densify', self.densify_config.describe()),
                            ('schedule', self.schedule.describe()),
                            ('learning_rates', self.learning_rates.describe()),
                            ('deform', self.avatar.config.describe())])

    def run(self, n_steps=None):
        '''Train until ``total_steps`` (or for ``n_steps`` more steps).

        Returns
        -------
        result : `TrainResult`
        '''
        if n_steps is None:
            n_steps = self.schedule.total_steps - self.step
        log.info('Training {0} steps on {1} frames with {2} Gaussians.'.format(
            n_steps, len(self.frames), len(self.avatar.cloud)))
        for i in range(n_steps):
            self.train_step()
        return TrainResult(self.avatar, self.poses, self.history, self.describe(), self.step)


def train(avatar, frames, background=(0., 0., 0.), **kwargs):
    '''Optimize ``avatar`` on ``frames``. See `Trainer` for the arguments.'''
    return Trainer(avatar, frames, background=background, **kwargs).run()
