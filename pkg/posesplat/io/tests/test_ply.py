# Licensed under GPL version 3 - see LICENSE.rst
import numpy as np
import pytest
from plyfile import PlyData, PlyElement

from ...gaussians import GaussianCloud
from ...utils import CheckpointError
from ..ply import read_ply, write_ply, ply_properties


def make_cloud(n=6, degree=3):
    rng = np.random.default_rng(11)
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return GaussianCloud(rng.normal(size=(n, 3)), q, rng.normal(size=(n, 3)),
                         rng.normal(size=n), rng.normal(size=(n, (degree + 1)**2, 3)))


def test_round_trip_exact(tmp_path):
    cloud = make_cloud()
    name = str(tmp_path / 'cloud.ply')
    write_ply(cloud, name)
    new = read_ply(name)
    for key, value in cloud.parameters().items():
        assert np.all(new.parameters()[key] == value)


def test_layout(tmp_path):
    cloud = make_cloud()
    name = str(tmp_path / 'cloud.ply')
    write_ply(cloud, name)
    ply = PlyData.read(name)
    vertex = ply['vertex']
    assert vertex.count == 6
    names = [p.name for p in vertex.properties]
    assert names[:6] == ['x', 'y', 'z', 'f_dc_0', 'f_dc_1', 'f_dc_2']
    assert len([p for p in names if p.startswith('f_rest_')]) == 45
    assert names[-8:] == ['opacity', 'scale_0', 'scale_1', 'scale_2',
                          'rot_0', 'rot_1', 'rot_2', 'rot_3']
    assert not ply.text
    assert ply.byte_order == '<'
    # the rest coefficients are ordered channel by channel
    assert vertex['f_rest_0'][2] == cloud.sh_coeffs[2, 1, 0]
    assert vertex['f_rest_15'][2] == cloud.sh_coeffs[2, 1, 1]
    assert vertex['f_rest_16'][2] == cloud.sh_coeffs[2, 2, 1]


def test_byte_stable(tmp_path):
    cloud = make_cloud()
    write_ply(cloud, str(tmp_path / 'a.ply'))
    write_ply(cloud.copy(), str(tmp_path / 'b.ply'))
    assert (tmp_path / 'a.ply').read_bytes() == (tmp_path / 'b.ply').read_bytes()


def test_single_precision(tmp_path):
    cloud = make_cloud(degree=0)
    name = str(tmp_path / 'cloud.ply')
    write_ply(cloud, name, single=True)
    assert ply_properties(1) == ['x', 'y', 'z', 'f_dc_0', 'f_dc_1', 'f_dc_2', 'opacity',
                                 'scale_0', 'scale_1', 'scale_2',
                                 'rot_0', 'rot_1', 'rot_2', 'rot_3']
    new = read_ply(name)
    assert new.sh_degree == 0
    assert np.allclose(new.positions, cloud.positions, rtol=1e-6)


def test_broken_files(tmp_path):
    data = np.zeros(3, dtype=[('x', 'f4'), ('y', 'f4'), ('z', 'f4')])
    name = str(tmp_path / 'points.ply')
    PlyData([PlyElement.describe(data, 'vertex')]).write(name)
    with pytest.raises(CheckpointError) as e:
        read_ply(name)
    assert 'f_dc_0' in str(e.value)

    props = [('f_rest_{0}'.format(i), 'f4') for i in range(6)]
    data = np.zeros(3, dtype=[('x', 'f4')] + props)
    PlyData([PlyElement.describe(data, 'vertex')]).write(name)
    with pytest.raises(CheckpointError) as e:
        read_ply(name)
    assert 'full SH bands' in str(e.value)


def test_unnormalized_rotations(tmp_path):
    cloud = make_cloud(degree=0)
    name = str(tmp_path / 'cloud.ply')
    write_ply(cloud, name)
    ply = PlyData.read(name)
    for i in range(4):
        ply['vertex'].data['rot_{0}'.format(i)] *= 2.5
    scaled = str(tmp_path / 'scaled.ply')
    ply.write(scaled)
    new = read_ply(scaled)
    assert np.allclose(new.rotations, cloud.rotations)
    assert np.allclose(new.positions, cloud.positions)

    for i in range(4):
        ply['vertex'].data['rot_{0}'.format(i)][4] = 0
    zero = str(tmp_path / 'zero.ply')
    ply.write(zero)
    with pytest.raises(CheckpointError) as e:
        read_ply(zero)
    assert 'zero length' in str(e.value)
