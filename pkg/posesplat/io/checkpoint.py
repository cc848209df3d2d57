# Licensed under GPL version 3 - see LICENSE.rst
'''Trained avatars on disk.

A checkpoint is a directory with the body model (``body.json``) and one
FITS file (``checkpoint.fits``) that holds everything else:

========== ===============================================================
HDU        content
========== ===============================================================
PRIMARY    header with format, version, step and number of Gaussians
GAUSSIANS  table, one row per Gaussian (parameters and binding)
MLP_*      one image per weight array of the non-rigid MLP
POSES      table, refined pose (and camera) of each training frame
BETA       table, shape coefficients
CONFIG     table of JSON strings: configuration blocks and background
HISTORY    training history
========== ===============================================================

All arrays are stored as 64 bit floats, so a checkpoint that is written
and read again renders exactly the same images.
'''
import hashlib
import json
import os
from collections import OrderedDict

import numpy as np
from astropy import log
from astropy.io import fits
from astropy.table import Table

from ..body import PoseState
from ..deform import Avatar, Binding, DeformConfig, NonRigidMLP
from ..gaussians import GaussianCloud
from ..render import Camera
from ..utils import CheckpointError
from .bodyfile import read_body, write_body
from .utils import atomic_path

__all__ = ['Checkpoint', 'read_checkpoint', 'CHECKPOINT_VERSION']

CHECKPOINT_VERSION = 1
FITS_NAME = 'checkpoint.fits'
BODY_NAME = 'body.json'
CAMERA_COLUMNS = ['fx', 'fy', 'cx', 'cy', 'width', 'height', 'near', 'far',
                  'camera_to_world']


def _file_hash(filename):
    with open(filename, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()


def _table_hdu(tab, name):
    hdu = fits.table_to_hdu(tab)
    hdu.name = name
    return hdu


class Checkpoint:
    '''An avatar together with what is needed to continue using it.

    Parameters
    ----------
    avatar : `posesplat.deform.Avatar`
    poses : list of `posesplat.body.PoseState`
        Refined pose of every training frame.
    history : `astropy.table.Table` or None
    config : dict
        ``describe()`` output of the configuration blocks of the run.
    step : int
        Number of training steps.
    background : np.array of shape (3, )
    cameras : list of `posesplat.render.Camera` or None
        Camera of every training frame.
    '''
    def __init__(self, avatar, poses=None, history=None, config=None, step=0,
                 background=(0., 0., 0.), cameras=None):
        self.avatar = avatar
        self.poses = [] if poses is None else list(poses)
        self.history = Table() if history is None else history
        self.config = OrderedDict() if config is None else OrderedDict(config)
        self.step = int(step)
        self.background = np.broadcast_to(np.asanyarray(background, dtype=float), (3, )).copy()
        self.cameras = [] if cameras is None else list(cameras)
        if self.cameras and len(self.cameras) != len(self.poses):
            raise ValueError('Need one camera per pose, got {0} cameras for {1} poses.'.format(
                len(self.cameras), len(self.poses)))

    @classmethod
    def from_result(cls, result, background=(0., 0., 0.), cameras=None):
        '''Checkpoint of a `posesplat.train.TrainResult`.'''
        return cls(result.avatar, result.poses, result.history, result.config, result.step,
                   background, cameras)

    def _config_table(self):
        entries = OrderedDict(self.config)
        entries['deform'] = self.avatar.config.describe()
        mlp = self.avatar.mlp
        entries['mlp'] = None if mlp is None else mlp.describe()
        entries['background'] = self.background.tolist()
        return Table(rows=[(k, json.dumps(v)) for k, v in entries.items()],
                     names=['name', 'value'], dtype=[str, str])

    def write(self, directory):
        '''Write the checkpoint directory.

        Both files are written to temporary names and renamed at the end.
        The FITS header records a hash of the body file, so that `read`
        rejects a directory where only one of the two was replaced.
        '''
        os.makedirs(directory, exist_ok=True)
        avatar = self.avatar
        with atomic_path(os.path.join(directory, BODY_NAME)) as body_tmp, \
                atomic_path(os.path.join(directory, FITS_NAME)) as fits_tmp:
            write_body(avatar.body, body_tmp)
            fits.HDUList(self._hdus(_file_hash(body_tmp))).writeto(fits_tmp, overwrite=True)
        log.info('Wrote checkpoint with {0} Gaussians to {1}.'.format(len(avatar.cloud), directory))

    def _hdus(self, body_hash):
        avatar = self.avatar
        primary = fits.PrimaryHDU()
        header = primary.header
        header['FORMAT'] = ('posesplat-checkpoint', 'file format')
        header['CKPTVER'] = (CHECKPOINT_VERSION, 'checkpoint format version')
        header['STEP'] = (self.step, 'number of training steps')
        header['NGAUSS'] = (len(avatar.cloud), 'number of Gaussians')
        header['BODYFILE'] = (BODY_NAME, 'body model, relative to this file')
        header['BODYHASH'] = body_hash
        hdus = [primary]

        tab = avatar.cloud.to_table()
        tab['binding'] = avatar.binding.neighbors
        tab.meta['BINDK'] = avatar.binding.k
        hdus.append(_table_hdu(tab, 'GAUSSIANS'))

        if avatar.mlp is not None:
            for name, value in avatar.mlp.params.items():
                hdu = fits.ImageHDU(np.asarray(value, dtype=float), name='MLP_' + name.upper())
                hdu.header['PARAM'] = name
                hdus.append(hdu)

        n_joints = avatar.body.n_joints
        if len(self.poses) > 0:
            poses = Table()
            poses['theta'] = np.array([p.theta for p in self.poses]).reshape(-1, n_joints, 3)
            poses['translation'] = np.array([p.translation for p in self.poses]).reshape(-1, 3)
            for name in CAMERA_COLUMNS if self.cameras else []:
                poses[name] = [c.describe()[name] for c in self.cameras]
            hdus.append(_table_hdu(poses, 'POSES'))
        if len(avatar.beta) > 0:
            hdus.append(_table_hdu(Table({'beta': np.asarray(avatar.beta, dtype=float)}), 'BETA'))
        hdus.append(_table_hdu(self._config_table(), 'CONFIG'))
        if len(self.history.colnames) > 0:
            hdus.append(_table_hdu(self.history, 'HISTORY'))
        return hdus

    @classmethod
    def read(cls, directory):
        '''Read a checkpoint directory.

        Raises
        ------
        posesplat.utils.CheckpointError
            If a file or HDU is missing, the format version is not
            supported or the body file does not belong to the FITS file.
        '''
        filename = os.path.join(directory, FITS_NAME)
        if not os.path.exists(filename):
            raise CheckpointError('{0} does not exist.'.format(filename))
        try:
            hdulist = fits.open(filename, memmap=False)
        except OSError as e:
            raise CheckpointError('{0}: {1}'.format(filename, e)) from None
        with hdulist:
            header = hdulist[0].header
            if header.get('FORMAT') != 'posesplat-checkpoint':
                raise CheckpointError('{0} is not a posesplat checkpoint.'.format(filename))
            if header.get('CKPTVER') != CHECKPOINT_VERSION:
                raise CheckpointError('{0} has format version {1}, but only version {2} can be read.'.format(
                    filename, header.get('CKPTVER'), CHECKPOINT_VERSION))

            def table(name, required=True):
                if name not in hdulist:
                    if required:
                        raise CheckpointError('{0}: HDU {1} is missing.'.format(filename, name))
                    return None
                return Table.read(hdulist[name])

            config = OrderedDict((row['name'], json.loads(row['value']))
                                 for row in table('CONFIG'))
            tab = table('GAUSSIANS')
            cloud = GaussianCloud.from_table(tab)
            neighbors = np.asarray(tab['binding'], dtype=int).reshape(len(tab), tab.meta['BINDK'])
            mlp = None
            if config['mlp'] is not None:
                mlp = NonRigidMLP(**config['mlp'])
                params = {}
                for name in mlp.params:
                    extname = 'MLP_' + name.upper()
                    if extname not in hdulist:
                        raise CheckpointError('{0}: HDU {1} is missing.'.format(filename, extname))
                    params[name] = np.array(hdulist[extname].data, dtype=float)
                mlp.set_params(params)
            poses_tab = table('POSES', required=False)
            beta_tab = table('BETA', required=False)
            beta = np.zeros(0) if beta_tab is None else np.array(beta_tab['beta'], dtype=float)
            history = table('HISTORY', required=False)
            step = header['STEP']
            body_name = header['BODYFILE']
            body_hash = header.get('BODYHASH')

        body_file = os.path.join(directory, body_name)
        if not os.path.exists(body_file):
            raise CheckpointError('{0} does not exist.'.format(body_file))
        if _file_hash(body_file) != body_hash:
            raise CheckpointError('{0} does not belong to {1}; the checkpoint was not written '
                                  'completely.'.format(body_file, filename))
        body = read_body(body_file)
        if len(beta) != body.n_shape:
            raise CheckpointError('{0}: beta has {1} entries, the body model {2} shape directions.'.format(
                filename, len(beta), body.n_shape))
        deform_config = DeformConfig(**_settings(config.pop('deform')))
        poses = [] if poses_tab is None else [
            PoseState(np.array(row['theta'], dtype=float).reshape(body.n_joints, 3),
                      np.array(row['translation'], dtype=float), beta)
            for row in poses_tab]
        cameras = None
        if poses_tab is not None and 'fx' in poses_tab.colnames:
            cameras = [Camera.from_description({name: row[name].tolist() for name in CAMERA_COLUMNS})
                       for row in poses_tab]
        avatar = Avatar(body, cloud, mlp=mlp, beta=beta, config=deform_config,
                        binding=Binding(neighbors, deform_config.sigma))
        config.pop('mlp')
        background = config.pop('background')
        return cls(avatar, poses, history, config, step, background, cameras)


def _settings(description):
    return {k: v for k, v in description.items() if k != 'block'}


def read_checkpoint(directory):
    '''Same as `Checkpoint.read`.'''
    return Checkpoint.read(directory)
