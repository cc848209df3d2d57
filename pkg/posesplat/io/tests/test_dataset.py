# Licensed under GPL version 3 - see LICENSE.rst
import json
import os

import numpy as np
import pytest

from ...body import procedural_body, star_pose, PoseState
from ...render import Camera
from ...utils import DatasetError
from ..dataset import Frame, SceneDataset, read_dataset, read_poses, write_poses
from ..images import quantize, write_image

body = procedural_body(ring_spacing=0.15, ring_vertices=5)


def make_dataset(n=3, masks=False):
    rng = np.random.default_rng(0)
    frames = []
    for i in range(n):
        cam = Camera.looking_at([np.sin(i), 0.9, 3 * np.cos(i)], [0., 0.9, 0.], fov=45,
                                width=8, height=6)
        mask = (rng.uniform(size=(6, 8)) > 0.5).astype(float) if masks else None
        frames.append(Frame(rng.uniform(size=(6, 8, 3)), cam,
                            PoseState(star_pose() + rng.normal(scale=0.1, size=(17, 3)),
                                      rng.normal(size=3)),
                            mask=mask, split='test' if i == n - 1 else 'train'))
    return SceneDataset(body, frames, background=(0., 0., 1.), beta=[0.1, -0.2],
                        meta={'seed': 4})


def manifest(directory):
    with open(os.path.join(directory, 'manifest.json')) as f:
        return json.load(f)


def test_round_trip(tmp_path):
    data = make_dataset(masks=True)
    data.write(str(tmp_path))
    new = read_dataset(str(tmp_path))
    assert len(new) == 3
    assert [f.split for f in new.frames] == ['train', 'train', 'test']
    assert new.meta['seed'] == 4
    assert np.all(new.beta == [0.1, -0.2])
    assert np.all(new.background == [0., 0., 1.])
    for old, f in zip(data.frames, new.frames):
        assert np.all(f.image == quantize(old.image))
        assert np.all(f.mask == old.mask)
        assert np.all(f.pose.theta == old.pose.theta)
        assert np.all(f.pose.translation == old.pose.translation)
        assert np.all(f.pose.beta == new.beta)
        assert np.all(f.camera.camera_to_world == old.camera.camera_to_world)
        assert f.camera.fx == old.camera.fx


def test_split():
    data = make_dataset()
    assert len(data.split('train')) == 2
    assert len(data.split('test')) == 1
    with pytest.raises(ValueError) as e:
        data.split('val')
    assert 'split must be' in str(e.value)


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetError) as e:
        read_dataset(str(tmp_path))
    assert 'manifest.json does not exist' in str(e.value)


def test_missing_frame(tmp_path):
    make_dataset().write(str(tmp_path))
    os.remove(str(tmp_path / 'frames' / '0001.png'))
    with pytest.raises(DatasetError) as e:
        read_dataset(str(tmp_path))
    assert 'frames/1' in str(e.value)
    assert 'does not exist' in str(e.value)


def test_wrong_image_size(tmp_path):
    make_dataset().write(str(tmp_path))
    write_image(np.zeros((5, 8, 3)), str(tmp_path / 'frames' / '0000.png'))
    with pytest.raises(DatasetError) as e:
        read_dataset(str(tmp_path))
    assert 'image is 8x5, the camera 8x6' in str(e.value)


def test_schema_violation(tmp_path):
    make_dataset().write(str(tmp_path))
    m = manifest(str(tmp_path))
    m['frames'][2]['camera']['fx'] = -3
    with open(str(tmp_path / 'manifest.json'), 'w') as f:
        json.dump(m, f)
    with pytest.raises(DatasetError) as e:
        read_dataset(str(tmp_path))
    assert 'invalid field frames/2/camera/fx' in str(e.value)


def test_wrong_number_of_joints(tmp_path):
    make_dataset().write(str(tmp_path))
    m = manifest(str(tmp_path))
    m['frames'][0]['theta'] = m['frames'][0]['theta'][:5]
    with open(str(tmp_path / 'manifest.json'), 'w') as f:
        json.dump(m, f)
    with pytest.raises(DatasetError) as e:
        read_dataset(str(tmp_path))
    assert '5 joints, the body model has 17' in str(e.value)


def test_poses(tmp_path):
    poses = [PoseState(star_pose(), [0., 1., 0.]), PoseState(np.zeros((17, 3)))]
    name = str(tmp_path / 'poses.json')
    write_poses(poses, name)
    new = read_poses(name, n_joints=17)
    assert len(new) == 2
    assert np.all(new[0].theta == poses[0].theta)
    assert np.all(new[0].translation == [0., 1., 0.])
    with pytest.raises(DatasetError) as e:
        read_poses(name, n_joints=16)
    assert 'expected 16' in str(e.value)


def test_invalid_split():
    with pytest.raises(ValueError):
        Frame(np.zeros((2, 2, 3)), None, None, split='val')


def test_resized():
    data = make_dataset(masks=True)
    small = data.resized(4)
    assert len(small) == len(data)
    for old, new in zip(data.frames, small.frames):
        assert new.image.shape == (3, 4, 3)
        assert new.mask.shape == (3, 4)
        assert (new.camera.width, new.camera.height) == (4, 3)
        assert new.camera.fx == pytest.approx(old.camera.fx / 2)
        assert new.pose is old.pose
        assert new.split == old.split
    assert small.meta == data.meta
    assert np.all(small.beta == data.beta)
    with pytest.raises(ValueError) as e:
        data.resized(0)
    assert 'at least 1 pixel' in str(e.value)
