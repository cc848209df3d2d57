# Licensed under GPL version 3 - see LICENSE.rst
import os

import numpy as np
import pytest
from astropy.io import fits
from astropy.table import Table

from ...body import procedural_body, star_pose, PoseState
from ...deform import Avatar, NonRigidMLP, DeformConfig
from ...render import Camera, render_avatar
from ...loss import LossConfig
from ...train import TrainSchedule
from ...utils import CheckpointError
from ..checkpoint import Checkpoint, read_checkpoint, CHECKPOINT_VERSION

body = procedural_body(ring_spacing=0.15, ring_vertices=5)
camera = Camera.looking_at([0.5, 1., 3.], [0., 0.9, 0.], fov=50, width=12, height=10)


def make_checkpoint(mlp=True):
    rng = np.random.default_rng(7)
    net = NonRigidMLP(width=8, depth=3, skip=1, n_freqs=2, seed=2) if mlp else None
    avatar = Avatar.from_body(body, sh_degree=2, mlp=net,
                              config=DeformConfig(k=2, sigma=0.2))
    if not mlp:
        avatar.mlp = None
    cloud = avatar.cloud
    cloud.positions += rng.normal(scale=0.01, size=cloud.positions.shape)
    cloud.sh_coeffs[:] = rng.normal(scale=0.3, size=cloud.sh_coeffs.shape)
    cloud.opacity_logits[:] = rng.normal(size=len(cloud))
    if mlp:
        for name, value in avatar.mlp.params.items():
            value[...] = rng.normal(scale=0.1, size=value.shape)
    avatar.beta = np.array([0.05, -0.1])
    poses = [PoseState(star_pose() + rng.normal(scale=0.1, size=(17, 3)), rng.normal(size=3),
                       avatar.beta) for i in range(3)]
    history = Table({'step': [10, 20], 'loss': [0.5, 0.25], 'psnr': [20., np.inf]})
    history.meta['SEED'] = 3
    config = {'loss': LossConfig().describe(), 'schedule': TrainSchedule(seed=3).describe()}
    cameras = [camera] * 3
    return Checkpoint(avatar, poses, history, config, step=20, background=(0.1, 0.2, 0.3),
                      cameras=cameras)


def test_round_trip(tmp_path):
    ckpt = make_checkpoint()
    ckpt.write(str(tmp_path))
    assert sorted(os.listdir(tmp_path)) == ['body.json', 'checkpoint.fits']
    new = read_checkpoint(str(tmp_path))
    for name, value in ckpt.avatar.cloud.parameters().items():
        assert np.all(new.avatar.cloud.parameters()[name] == value)
    for name, value in ckpt.avatar.mlp.params.items():
        assert np.all(new.avatar.mlp.params[name] == value)
    assert new.avatar.mlp.describe() == ckpt.avatar.mlp.describe()
    assert np.all(new.avatar.binding.neighbors == ckpt.avatar.binding.neighbors)
    assert new.avatar.binding.sigma == 0.2
    assert new.avatar.config.k == 2
    assert np.all(new.avatar.beta == ckpt.avatar.beta)
    assert len(new.poses) == 3
    for a, b in zip(new.poses, ckpt.poses):
        assert np.all(a.theta == b.theta)
        assert np.all(a.translation == b.translation)
    assert list(new.history['psnr']) == [20., np.inf]
    assert new.history.meta['SEED'] == 3
    assert new.config['schedule']['seed'] == 3
    assert new.config['loss'] == ckpt.config['loss']
    assert np.all(new.background == [0.1, 0.2, 0.3])
    assert new.step == 20
    assert len(new.cameras) == 3
    assert np.all(new.cameras[2].camera_to_world == camera.camera_to_world)
    assert (new.cameras[0].width, new.cameras[0].height) == (12, 10)
    assert new.cameras[0].fx == camera.fx


def test_renders_identical(tmp_path):
    ckpt = make_checkpoint()
    ckpt.write(str(tmp_path))
    new = read_checkpoint(str(tmp_path))
    img1 = render_avatar(ckpt.avatar, ckpt.poses[1], camera, n_threads=1)[2].image
    img2 = render_avatar(new.avatar, new.poses[1], camera, n_threads=1)[2].image
    assert np.all(img1 == img2)


def test_without_mlp_and_history(tmp_path):
    ckpt = make_checkpoint(mlp=False)
    ckpt.history = Table()
    ckpt.poses = []
    ckpt.cameras = []
    ckpt.write(str(tmp_path))
    new = read_checkpoint(str(tmp_path))
    assert new.avatar.mlp is None
    assert new.poses == []
    assert new.cameras == []
    assert len(new.history) == 0


def test_header(tmp_path):
    make_checkpoint().write(str(tmp_path))
    with fits.open(str(tmp_path / 'checkpoint.fits')) as hdul:
        assert hdul[0].header['CKPTVER'] == CHECKPOINT_VERSION
        assert hdul[0].header['NGAUSS'] == body.n_vertices
        assert 'MLP_W0' in hdul
        assert hdul['MLP_W_DX'].header['PARAM'] == 'w_dx'
        assert len(hdul[0].header['BODYHASH']) == 64


def test_missing(tmp_path):
    with pytest.raises(CheckpointError) as e:
        read_checkpoint(str(tmp_path))
    assert 'does not exist' in str(e.value)


def test_wrong_version(tmp_path):
    make_checkpoint().write(str(tmp_path))
    name = str(tmp_path / 'checkpoint.fits')
    with fits.open(name, mode='update') as hdul:
        hdul[0].header['CKPTVER'] = CHECKPOINT_VERSION + 1
    with pytest.raises(CheckpointError) as e:
        read_checkpoint(str(tmp_path))
    assert 'format version {0}'.format(CHECKPOINT_VERSION + 1) in str(e.value)


def test_missing_hdu(tmp_path):
    make_checkpoint().write(str(tmp_path))
    name = str(tmp_path / 'checkpoint.fits')
    with fits.open(name) as hdul:
        hdus = fits.HDUList([h.copy() for h in hdul if h.name != 'GAUSSIANS'])
    hdus.writeto(name, overwrite=True)
    with pytest.raises(CheckpointError) as e:
        read_checkpoint(str(tmp_path))
    assert 'HDU GAUSSIANS is missing' in str(e.value)


def test_not_a_checkpoint(tmp_path):
    fits.HDUList([fits.PrimaryHDU()]).writeto(str(tmp_path / 'checkpoint.fits'))
    with pytest.raises(CheckpointError) as e:
        read_checkpoint(str(tmp_path))
    assert 'not a posesplat checkpoint' in str(e.value)


def test_cameras_must_match_poses():
    ckpt = make_checkpoint()
    with pytest.raises(ValueError) as e:
        Checkpoint(ckpt.avatar, ckpt.poses, cameras=[camera])
    assert 'one camera per pose' in str(e.value)


def test_body_must_match(tmp_path):
    make_checkpoint().write(str(tmp_path / 'a'))
    ckpt = make_checkpoint()
    ckpt.avatar.body = procedural_body(ring_spacing=0.15, ring_vertices=5, softness=0.05)
    ckpt.write(str(tmp_path / 'b'))
    os.replace(str(tmp_path / 'b' / 'body.json'), str(tmp_path / 'a' / 'body.json'))
    with pytest.raises(CheckpointError) as e:
        read_checkpoint(str(tmp_path / 'a'))
    assert 'does not belong' in str(e.value)


def test_failed_overwrite_keeps_old(tmp_path, monkeypatch):
    old = make_checkpoint()
    old.write(str(tmp_path))
    new = make_checkpoint()
    new.avatar.body = procedural_body(ring_spacing=0.15, ring_vertices=5, softness=0.05)

    def fail(*args, **kwargs):
        raise OSError('disk full')

    monkeypatch.setattr(fits.HDUList, 'writeto', fail)
    with pytest.raises(OSError):
        new.write(str(tmp_path))
    monkeypatch.undo()
    assert sorted(os.listdir(tmp_path)) == ['body.json', 'checkpoint.fits']
    ckpt = read_checkpoint(str(tmp_path))
    assert np.allclose(ckpt.avatar.body.skinning_weights, body.skinning_weights)
