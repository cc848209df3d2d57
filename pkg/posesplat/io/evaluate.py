# Licensed under GPL version 3 - see LICENSE.rst
'''Image quality of an avatar on the frames of a dataset.'''
from collections import OrderedDict

import numpy as np
from astropy import log
from astropy.table import Table

from ..loss import psnr, ssim
from ..render import render_avatar
from ..train import frame_target
from ..utils import DatasetError
from .images import quantize
from .utils import write_json

__all__ = ['evaluate', 'write_report', 'json_number']


def json_number(value):
    '''``value`` as float, with ``'inf'`` for the PSNR of identical images.'''
    value = float(value)
    if np.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return value


def evaluate(checkpoint, dataset, split='train', n_threads=None):
    '''Render every frame of one split and compare it with the frame.

    Renders are quantized to 8 bit, the precision of the frames, before
    PSNR and SSIM are computed. For the training split the refined poses
    stored in the checkpoint are used (if there is one per training
    frame), otherwise the poses from the dataset.

    Parameters
    ----------
    checkpoint : `posesplat.io.Checkpoint`
    dataset : `posesplat.io.SceneDataset`
    split : str
        ``'train'`` or ``'test'``.
    n_threads : int or None
        Passed to the renderer.

    Returns
    -------
    tab : `astropy.table.Table`
        One row per frame with columns ``frame``, ``psnr`` and ``ssim``.
    summary : OrderedDict
        Split, number of frames and mean PSNR and SSIM.
    '''
    frames = dataset.split(split)
    if len(frames) == 0:
        raise DatasetError('Dataset has no frames in split "{0}".'.format(split))
    avatar = checkpoint.avatar
    if avatar.body.n_joints != dataset.body.n_joints:
        raise DatasetError('Checkpoint body has {0} joints, the dataset body {1}.'.format(
            avatar.body.n_joints, dataset.body.n_joints))
    poses = [f.pose for f in frames]
    if split == 'train' and len(checkpoint.poses) == len(frames):
        poses = checkpoint.poses
    posed_c = avatar.body.pose(avatar.canonical_state())

    rows = []
    for frame, pose in zip(frames, poses):
        out = render_avatar(avatar, pose, frame.camera, background=dataset.background,
                            posed_c=posed_c, n_threads=n_threads)[2]
        image = quantize(out.image)
        target = frame_target(frame, dataset.background)
        rows.append((frame.name, psnr(image, target), ssim(image, target)))
        log.debug('Frame {0}: PSNR {1:.2f} dB, SSIM {2:.4f}'.format(*rows[-1]))

    tab = Table(rows=rows, names=['frame', 'psnr', 'ssim'], dtype=[str, float, float])
    tab['psnr'].unit = 'dB'
    tab['psnr'].format = '.3f'
    tab['ssim'].format = '.4f'
    tab.meta['split'] = split
    summary = OrderedDict([('split', split), ('n_frames', len(tab)),
                           ('mean_psnr', float(np.mean(tab['psnr']))),
                           ('mean_ssim', float(np.mean(tab['ssim'])))])
    log.info('{0}: mean PSNR {1:.2f} dB, mean SSIM {2:.4f} on {3} frames.'.format(
        split, summary['mean_psnr'], summary['mean_ssim'], len(tab)))
    return tab, summary


def write_report(tab, summary, filename):
    '''Write the output of `evaluate` as JSON.

    Infinite PSNR values are written as the string ``"inf"``.
    '''
    report = OrderedDict((k, json_number(v) if k.startswith('mean') else v)
                         for k, v in summary.items())
    report['frames'] = [OrderedDict([('frame', str(row['frame'])),
                                     ('psnr', json_number(row['psnr'])),
                                     ('ssim', json_number(row['ssim']))])
                        for row in tab]
    write_json(report, filename)
