# Licensed under GPL version 3 - see LICENSE.rst
'''Command line interface.

Run ``posesplat --help`` for a list of commands and ``posesplat COMMAND
--help`` for the options of one command.
'''
import argparse
import os
from collections import OrderedDict

import numpy as np
import yaml
from astropy import log
from astropy.table import Table

from .. import conf
from ..deform import Avatar, DeformConfig, NonRigidMLP
from ..gaussians import GaussianCloud
from ..io import (Checkpoint, read_checkpoint, read_dataset, read_poses, write_image,
                  write_ply, synth_dataset, evaluate, write_report, orbit_camera)
from ..loss import LossConfig
from ..render import render_avatar
from ..train import DensifyConfig, TrainSchedule, LearningRates, Trainer
from ..utils import PoseSplatError

__all__ = ['main', 'load_config', 'train_checkpoint', 'ABLATIONS']

CONFIG_SECTIONS = OrderedDict([('loss', LossConfig), ('densify', DensifyConfig),
                               ('schedule', TrainSchedule), ('learning_rates', LearningRates),
                               ('deform', DeformConfig), ('mlp', NonRigidMLP)])

ABLATIONS = OrderedDict([
    ('full', {}),
    ('no_rot', {'loss': {'lambda_rot': 0.}}),
    ('no_iso', {'loss': {'lambda_iso': 0.}}),
    ('no_split_scale', {'densify': {'split_with_scale': False}}),
    ('no_body_refine', {'schedule': {'refine_body': False}}),
    ('no_view_dir', {'deform': {'canonical_view_dir': False}}),
])
'''Changes to the configuration for each variant of ``posesplat ablate``.'''


def load_config(filename=None, overrides=None):
    '''Settings for a training run, section by section.

    Parameters
    ----------
    filename : str or None
        YAML file with the top-level keys ``loss``, ``densify``,
        ``schedule``, ``learning_rates``, ``deform`` and ``mlp``. Each key
        maps setting names to values.
    overrides : dict or None
        Same layout; takes precedence over the file.

    Returns
    -------
    config : OrderedDict
        One dict of keyword arguments per section.
    '''
    config = OrderedDict((k, {}) for k in CONFIG_SECTIONS)
    layers = []
    if filename is not None:
        with open(filename) as f:
            try:
                layers.append(yaml.safe_load(f) or {})
            except yaml.YAMLError as e:
                raise PoseSplatError('{0}: {1}'.format(filename, e)) from None
        if not isinstance(layers[0], dict):
            raise PoseSplatError('{0}: expected a mapping of sections.'.format(filename))
    layers.append(overrides or {})
    for layer in layers:
        for section, values in layer.items():
            if section not in config:
                raise PoseSplatError('Unknown configuration section "{0}". Valid sections are: {1}.'.format(
                    section, ', '.join(config)))
            config[section].update(values or {})
    return config


def _make_blocks(config):
    blocks = OrderedDict()
    for section, cls in CONFIG_SECTIONS.items():
        if section == 'mlp':
            continue
        try:
            blocks[section] = cls(**config[section])
        except ValueError as e:
            raise PoseSplatError('Configuration section "{0}": {1}'.format(section, e)) from None
    return blocks


def train_checkpoint(dataset, config, sh_degree=None, n_threads=None):
    '''Train a new avatar on the training frames of ``dataset``.

    Returns
    -------
    checkpoint : `posesplat.io.Checkpoint`
    '''
    blocks = _make_blocks(config)
    mlp_kwargs = dict(config['mlp'])
    mlp_kwargs.setdefault('seed', blocks['schedule'].seed)
    try:
        mlp = NonRigidMLP(**mlp_kwargs)
    except TypeError as e:
        raise PoseSplatError('Configuration section "mlp": {0}'.format(e)) from None
    avatar = Avatar.from_body(dataset.body, mlp=mlp, config=blocks['deform'],
                              beta=dataset.beta.copy(),
                              sh_degree=conf.sh_degree if sh_degree is None else sh_degree)
    frames = dataset.split('train')
    trainer = Trainer(avatar, frames, background=dataset.background, loss=blocks['loss'],
                      densify=blocks['densify'], schedule=blocks['schedule'],
                      learning_rates=blocks['learning_rates'],
                      render_kwargs={'n_threads': n_threads})
    result = trainer.run()
    return Checkpoint.from_result(result, dataset.background, [f.camera for f in frames])


def _common_overrides(args):
    overrides = {'schedule': {}}
    if getattr(args, 'seed', None) is not None:
        overrides['schedule']['seed'] = args.seed
    if getattr(args, 'steps', None) is not None:
        overrides['schedule']['total_steps'] = args.steps
    return overrides


def cmd_synth(args):
    synth_dataset(args.out, seed=1 if args.seed is None else args.seed, n_frames=args.frames,
                  resolution=args.resolution or 64, n_novel=args.novel,
                  pose_noise=args.pose_noise, masks=args.masks, n_threads=args.threads)


def _training_dataset(args):
    dataset = read_dataset(args.dataset)
    if args.resolution is not None:
        dataset = dataset.resized(args.resolution)
    return dataset


def cmd_train(args):
    dataset = _training_dataset(args)
    config = load_config(args.config, _common_overrides(args))
    ckpt = train_checkpoint(dataset, config, sh_degree=args.sh_degree, n_threads=args.threads)
    ckpt.write(args.out)
    ckpt.history.write(os.path.join(args.out, 'history.ecsv'), overwrite=True)


def _pose(args, ckpt):
    if args.poses is not None:
        poses = read_poses(args.poses, n_joints=ckpt.avatar.body.n_joints)
        if not 0 <= args.index < len(poses):
            raise PoseSplatError('{0} has {1} poses, there is no pose {2}.'.format(
                args.poses, len(poses), args.index))
        return poses[args.index]
    frame = 0 if args.frame is None else args.frame
    if not 0 <= frame < len(ckpt.poses):
        raise PoseSplatError('Checkpoint has {0} training frames, there is no frame {1}.'.format(
            len(ckpt.poses), frame))
    return ckpt.poses[frame]


def cmd_render(args):
    ckpt = read_checkpoint(args.checkpoint)
    pose = _pose(args, ckpt)
    if args.poses is None and args.resolution is None and ckpt.cameras:
        camera = ckpt.cameras[0 if args.frame is None else args.frame]
    else:
        camera = orbit_camera(np.deg2rad(args.azimuth), args.resolution or 64)
    out = render_avatar(ckpt.avatar, pose, camera, background=ckpt.background,
                        n_threads=args.threads)[2]
    write_image(out.image, args.out)
    log.info('Wrote {0}.'.format(args.out))


def cmd_animate(args):
    ckpt = read_checkpoint(args.checkpoint)
    poses = read_poses(args.poses, n_joints=ckpt.avatar.body.n_joints)
    os.makedirs(args.out, exist_ok=True)
    posed_c = ckpt.avatar.body.pose(ckpt.avatar.canonical_state())
    for i, pose in enumerate(poses):
        azimuth = args.azimuth + (360. * i / len(poses) if args.orbit else 0.)
        camera = orbit_camera(np.deg2rad(azimuth), args.resolution or 64)
        out = render_avatar(ckpt.avatar, pose, camera, background=ckpt.background,
                            posed_c=posed_c, n_threads=args.threads)[2]
        write_image(out.image, os.path.join(args.out, 'frame_{0:04d}.png'.format(i)))
    log.info('Wrote {0} frames to {1}.'.format(len(poses), args.out))


def cmd_eval(args):
    ckpt = read_checkpoint(args.checkpoint)
    dataset = read_dataset(args.dataset)
    tab, summary = evaluate(ckpt, dataset, args.split, n_threads=args.threads)
    tab.pprint(max_lines=-1)
    out = args.out or os.path.join(args.checkpoint, 'report_{0}.json'.format(args.split))
    write_report(tab, summary, out)


def cmd_export_ply(args):
    ckpt = read_checkpoint(args.checkpoint)
    cloud = ckpt.avatar.cloud
    if args.pose is not None:
        poses = read_poses(args.pose, n_joints=ckpt.avatar.body.n_joints)
        if not 0 <= args.index < len(poses):
            raise PoseSplatError('{0} has {1} poses, there is no pose {2}.'.format(
                args.pose, len(poses), args.index))
        deformed = ckpt.avatar.deform(poses[args.index])
        cloud = _posed_cloud(deformed)
    write_ply(cloud, args.out, single=args.single)
    log.info('Wrote {0} Gaussians to {1}.'.format(len(cloud), args.out))


def _posed_cloud(deformed):
    '''Snapshot of a `posesplat.deform.DeformedCloud` as a plain cloud.'''
    return GaussianCloud(deformed.positions, deformed.rotations, deformed.log_scales,
                         deformed.opacity_logits, deformed.sh_coeffs)


def cmd_ablate(args):
    dataset = _training_dataset(args)
    rows = []
    for variant in args.variants:
        overrides = _common_overrides(args)
        for section, values in ABLATIONS[variant].items():
            overrides.setdefault(section, {}).update(values)
        config = load_config(args.config, overrides)
        log.info('Ablation variant {0}.'.format(variant))
        ckpt = train_checkpoint(dataset, config, n_threads=args.threads)
        ckpt.write(os.path.join(args.out, variant))
        row = [variant]
        for split in ['train', 'test']:
            if len(dataset.split(split)) == 0:
                row.extend([np.nan, np.nan])
                continue
            tab, summary = evaluate(ckpt, dataset, split, n_threads=args.threads)
            row.extend([summary['mean_psnr'], summary['mean_ssim']])
        rows.append(row)
    tab = Table(rows=rows, names=['variant', 'train_psnr', 'train_ssim', 'novel_psnr',
                                  'novel_ssim'])
    for col in tab.colnames[1:]:
        tab[col].format = '.3f'
    tab.meta['SEED'] = config['schedule'].get('seed', TrainSchedule.seed)
    tab.pprint(max_lines=-1)
    tab.write(os.path.join(args.out, 'ablation.ecsv'), overwrite=True)


def build_parser():
    parser = argparse.ArgumentParser(prog='posesplat',
                                     description='Pose-guided animatable Gaussian avatars.')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='log debug messages')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='only log warnings')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        p.add_argument('--threads', type=int, default=None,
                       help='worker threads for rendering (default: posesplat.conf.n_threads)')
        return p

    p = add('synth', cmd_synth, 'write a synthetic dataset and its ground-truth checkpoint')
    p.add_argument('out', help='output directory')
    p.add_argument('--seed', type=int, default=None, help='random seed (default: 1)')
    p.add_argument('--frames', type=int, default=20, help='number of training frames')
    p.add_argument('--novel', type=int, default=4, help='number of test frames at held-out poses')
    p.add_argument('--resolution', type=int, default=None, help='image size in pixels (default: 64)')
    p.add_argument('--pose-noise', type=float, default=0., help='noise in rad on the manifest poses')
    p.add_argument('--masks', action='store_true', help='also write foreground masks')

    def add_training(p):
        p.add_argument('--config', default=None, help='YAML configuration file')
        p.add_argument('--seed', type=int, default=None, help='random seed')
        p.add_argument('--steps', type=int, default=None, help='number of training steps')
        p.add_argument('--resolution', type=int, default=None,
                       help='resample the frames to this width in pixels')

    p = add('train', cmd_train, 'train an avatar on a dataset')
    p.add_argument('dataset', help='dataset directory')
    p.add_argument('out', help='checkpoint directory')
    add_training(p)
    p.add_argument('--sh-degree', type=int, default=None, choices=range(4),
                   help='SH degree of the Gaussians (default: posesplat.conf.sh_degree)')

    p = add('render', cmd_render, 'render one image of a checkpoint')
    p.add_argument('checkpoint', help='checkpoint directory')
    p.add_argument('--out', required=True, help='PNG file')
    source = p.add_mutually_exclusive_group()
    source.add_argument('--frame', type=int, default=None,
                        help='pose (and camera) of this training frame (default: 0)')
    source.add_argument('--poses', default=None, help='pose sequence JSON')
    p.add_argument('--index', type=int, default=0, help='entry of the pose sequence')
    p.add_argument('--resolution', type=int, default=None,
                   help='render with an orbit camera of this size')
    p.add_argument('--azimuth', type=float, default=0., help='orbit camera azimuth in degrees')

    p = add('animate', cmd_animate, 'render every pose of a pose sequence')
    p.add_argument('checkpoint', help='checkpoint directory')
    p.add_argument('poses', help='pose sequence JSON')
    p.add_argument('out', help='output directory for the PNG files')
    p.add_argument('--resolution', type=int, default=None, help='image size in pixels (default: 64)')
    p.add_argument('--azimuth', type=float, default=0., help='camera azimuth in degrees')
    p.add_argument('--orbit', action='store_true', help='move the camera once around the body')

    p = add('eval', cmd_eval, 'PSNR and SSIM of a checkpoint on a dataset')
    p.add_argument('checkpoint', help='checkpoint directory')
    p.add_argument('dataset', help='dataset directory')
    p.add_argument('--split', choices=['train', 'test'], default='train')
    p.add_argument('--out', default=None,
                   help='report file (default: CHECKPOINT/report_SPLIT.json)')

    p = add('export-ply', cmd_export_ply, 'write the Gaussians of a checkpoint as PLY')
    p.add_argument('checkpoint', help='checkpoint directory')
    p.add_argument('out', help='PLY file')
    p.add_argument('--pose', default=None,
                   help='pose sequence JSON; export the posed instead of the canonical cloud')
    p.add_argument('--index', type=int, default=0, help='entry of the pose sequence')
    p.add_argument('--single', action='store_true', help='32 bit floats')

    p = add('ablate', cmd_ablate, 'train and evaluate variants of the model')
    p.add_argument('dataset', help='dataset directory')
    p.add_argument('out', help='output directory')
    add_training(p)
    p.add_argument('--variants', nargs='+', choices=list(ABLATIONS), default=list(ABLATIONS))
    return parser


def main(argv=None):
    '''Run the command line interface.

    Returns
    -------
    code : int
        0 on success, 1 if the command failed, 2 for invalid arguments.
    '''
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    level = log.getEffectiveLevel()
    if args.verbose:
        log.setLevel('DEBUG')
    elif args.quiet:
        log.setLevel('WARNING')
    try:
        args.func(args)
    except (PoseSplatError, OSError, ValueError) as e:
        log.error(str(e))
        return 1
    finally:
        log.setLevel(level)
    return 0
