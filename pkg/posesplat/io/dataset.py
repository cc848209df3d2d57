# Licensed under GPL version 3 - see LICENSE.rst
'''Scene datasets: posed frames of one subject.

A dataset is a directory::

    manifest.json     cameras, poses and file names of all frames
    body.json         body model (see `posesplat.io.read_body`)
    frames/*.png      8-bit RGB images
    masks/*.png       optional foreground masks

The manifest is validated against ``schemas/manifest.json`` when it is
read.
'''
import os
from collections import OrderedDict

import numpy as np
from astropy import log

from ..body import PoseState
from ..render import Camera
from ..utils import DatasetError
from .bodyfile import read_body, write_body
from .images import read_image, write_image, read_mask, write_mask, resize_image
from .utils import read_json, write_json

__all__ = ['Frame', 'SceneDataset', 'read_dataset', 'read_poses', 'write_poses',
           'pose_to_dict', 'pose_from_dict']

MANIFEST = 'manifest.json'


def pose_to_dict(pose):
    return OrderedDict([('theta', pose.theta.tolist()), ('translation', pose.translation.tolist())])


def pose_from_dict(d, beta=None):
    return PoseState(d['theta'], d.get('translation'), beta)


class Frame:
    '''One posed image.

    Parameters
    ----------
    image : np.array of shape (H, W, 3)
    camera : `posesplat.render.Camera`
    pose : `posesplat.body.PoseState`
    mask : np.array of shape (H, W) or None
    name : str
    split : str
        ``'train'`` or ``'test'``.
    '''
    def __init__(self, image, camera, pose, mask=None, name='', split='train'):
        self.image = image
        self.camera = camera
        self.pose = pose
        self.mask = mask
        self.name = name
        if split not in ('train', 'test'):
            raise ValueError('split must be "train" or "test", not {0}.'.format(split))
        self.split = split

    def __repr__(self):
        return 'Frame({0}, {1}, {2}x{3})'.format(self.name, self.split, self.camera.width,
                                                 self.camera.height)


class SceneDataset:
    '''Frames of one subject together with its body model.

    Parameters
    ----------
    body : `posesplat.body.BodyModel`
    frames : list of `Frame`
    background : np.array of shape (3, )
        Color behind the subject; the color renders are composited on.
    beta : np.array of shape (S, ) or None
        Shape estimate.
    meta : dict
        Extra keys for the manifest (e.g. ``seed``).
    '''
    def __init__(self, body, frames, background=(0., 0., 0.), beta=None, meta=None):
        self.body = body
        self.frames = list(frames)
        self.background = np.broadcast_to(np.asanyarray(background, dtype=float), (3, )).copy()
        self.beta = np.zeros(body.n_shape) if beta is None else np.array(beta, dtype=float)
        self.meta = OrderedDict() if meta is None else OrderedDict(meta)

    def __len__(self):
        return len(self.frames)

    def split(self, name):
        '''Frames of one split (``'train'`` or ``'test'``).'''
        if name not in ('train', 'test'):
            raise ValueError('split must be "train" or "test", not {0}.'.format(name))
        return [f for f in self.frames if f.split == name]

    def resized(self, width):
        '''Copy with all images resampled to ``width`` pixels.

        The height keeps the aspect ratio of each frame and the cameras
        are adjusted to the new size.
        '''
        if width < 1:
            raise ValueError('width must be at least 1 pixel, not {0}.'.format(width))
        frames = []
        for f in self.frames:
            height = max(1, int(round(f.camera.height * width / f.camera.width)))
            mask = None if f.mask is None else resize_image(f.mask, width, height)
            frames.append(Frame(resize_image(f.image, width, height),
                                f.camera.resized(width, height), f.pose, mask=mask,
                                name=f.name, split=f.split))
        return SceneDataset(self.body, frames, self.background, self.beta, self.meta)

    def write(self, directory):
        '''Write images, masks, body model and manifest.

        The manifest is written last, so a directory with a manifest is
        always complete.
        '''
        os.makedirs(os.path.join(directory, 'frames'), exist_ok=True)
        write_body(self.body, os.path.join(directory, 'body.json'))
        frames = []
        for i, f in enumerate(self.frames):
            name = f.name or '{0:04d}'.format(i)
            entry = OrderedDict([('name', name),
                                 ('image', 'frames/{0}.png'.format(name)),
                                 ('split', f.split)])
            write_image(f.image, os.path.join(directory, entry['image']))
            if f.mask is not None:
                os.makedirs(os.path.join(directory, 'masks'), exist_ok=True)
                entry['mask'] = 'masks/{0}.png'.format(name)
                write_mask(f.mask, os.path.join(directory, entry['mask']))
            entry['camera'] = f.camera.describe()
            entry.update(pose_to_dict(f.pose))
            frames.append(entry)
        manifest = OrderedDict([('format', 'posesplat-dataset'), ('version', 1),
                                ('body_model', 'body.json'),
                                ('background', self.background.tolist()),
                                ('beta', self.beta.tolist())])
        manifest.update(self.meta)
        manifest['frames'] = frames
        write_json(manifest, os.path.join(directory, MANIFEST), schema='manifest')
        log.info('Wrote {0} frames to {1}.'.format(len(frames), directory))

    @classmethod
    def read(cls, directory):
        '''Read a dataset directory.

        Raises
        ------
        posesplat.utils.DatasetError
            If the manifest does not follow the schema, a file is missing,
            an image does not have the size of its camera or a pose does
            not fit the body model.
        '''
        filename = os.path.join(directory, MANIFEST)
        if not os.path.exists(filename):
            raise DatasetError('{0} does not exist.'.format(filename))
        manifest = read_json(filename, 'manifest')
        body = read_body(os.path.join(directory, manifest['body_model']))
        beta = manifest.get('beta')
        if beta is not None and len(beta) != body.n_shape:
            raise DatasetError('{0}: beta has {1} entries, the body model {2} shape directions.'.format(
                filename, len(beta), body.n_shape))
        frames = []
        for i, entry in enumerate(manifest['frames']):
            where = '{0}: frames/{1}'.format(filename, i)
            if len(entry['theta']) != body.n_joints:
                raise DatasetError('{0}/theta: {1} joints, the body model has {2}.'.format(
                    where, len(entry['theta']), body.n_joints))
            try:
                camera = Camera.from_description(entry['camera'])
            except ValueError as e:
                raise DatasetError('{0}/camera: {1}'.format(where, e)) from None
            image = cls._load(directory, entry['image'], where, read_image)
            if image.shape[:2] != (camera.height, camera.width):
                raise DatasetError('{0}: image is {1}x{2}, the camera {3}x{4}.'.format(
                    where, image.shape[1], image.shape[0], camera.width, camera.height))
            mask = None
            if 'mask' in entry:
                mask = cls._load(directory, entry['mask'], where, read_mask)
                if mask.shape != image.shape[:2]:
                    raise DatasetError('{0}: mask and image differ in size.'.format(where))
            frames.append(Frame(image, camera, pose_from_dict(entry, beta), mask=mask,
                                name=entry.get('name', '{0:04d}'.format(i)),
                                split=entry.get('split', 'train')))
        meta = OrderedDict((k, v) for k, v in manifest.items()
                           if k not in ('format', 'version', 'body_model', 'background',
                                        'beta', 'frames'))
        return cls(body, frames, background=manifest.get('background', (0., 0., 0.)),
                   beta=beta, meta=meta)

    @staticmethod
    def _load(directory, name, where, reader):
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            raise DatasetError('{0}: file {1} does not exist.'.format(where, path))
        return reader(path)


def read_dataset(directory):
    '''Same as `SceneDataset.read`.'''
    return SceneDataset.read(directory)


def write_poses(poses, filename):
    '''Write a pose sequence (list of `posesplat.body.PoseState`) as JSON.'''
    write_json(OrderedDict([('format', 'posesplat-poses'), ('version', 1),
                            ('poses', [pose_to_dict(p) for p in poses])]),
               filename, schema='poses')


def read_poses(filename, n_joints=None):
    '''Read a pose sequence.

    Parameters
    ----------
    filename : str
    n_joints : int or None
        If given, every pose must have this many joints.

    Returns
    -------
    poses : list of `posesplat.body.PoseState`
    '''
    data = read_json(filename, 'poses')
    if n_joints is not None:
        for i, p in enumerate(data['poses']):
            if len(p['theta']) != n_joints:
                raise DatasetError('{0}: poses/{1}/theta: {2} joints, expected {3}.'.format(
                    filename, i, len(p['theta']), n_joints))
    return [pose_from_dict(p) for p in data['poses']]
