# Licensed under GPL version 3 - see LICENSE.rst
from types import SimpleNamespace

import numpy as np
import pytest

from ...gaussians import GaussianCloud
from ...math.sh import rgb_to_sh_dc
from ...math.utils import sigmoid
from ...utils import RenderDiagnosticsWarning
from ...tests.helpers import numerical_gradient, random_unit_quaternions
from ..camera import Camera
from ..rasterizer import project, render, render_backward, tile_map

rng = np.random.default_rng(5)


def front_camera(width=16, height=16, f=20., distance=5.):
    '''Camera on the negative z axis looking at the origin, pixel (8, 8) on the axis.'''
    return Camera(f, f, width / 2, height / 2, width, height, position=[0, 0, -distance])


def single(position, log_scale, opacity_logit, rgb):
    return GaussianCloud([position], [[1., 0, 0, 0]], [[log_scale] * 3], [opacity_logit],
                         rgb_to_sh_dc(np.array(rgb, dtype=float))[None, None, :])


def random_scene(n, sh_degree=1, spread=0.5):
    sh = rng.normal(scale=0.1, size=(n, (sh_degree + 1)**2, 3))
    return GaussianCloud(rng.normal(scale=spread, size=(n, 3)), random_unit_quaternions(rng, n),
                         rng.normal(loc=-2., scale=0.3, size=(n, 3)),
                         rng.normal(size=n), sh)


def test_project_on_axis():
    cam = front_camera()
    mean, cov, depth, vis = project([[0, 0, 0]], [[1., 0, 0, 0]], [[np.log(0.1)] * 3], cam)
    assert np.allclose(mean[0], [cam.cx, cam.cy])
    assert depth[0] == pytest.approx(5)
    assert vis[0]
    expected = (20 * 0.1 / 5)**2 + 0.3
    assert np.allclose(cov[0], expected * np.eye(2))


def test_project_depth_halves_std():
    args = ([[0, 0, 0]], [[1., 0, 0, 0]], [[np.log(0.1)] * 3])
    near = project(*args, front_camera(distance=5.), cov2d_floor=0.)[1]
    far = project(*args, front_camera(distance=10.), cov2d_floor=0.)[1]
    assert np.sqrt(far[0, 0, 0] / near[0, 0, 0]) == pytest.approx(0.5, rel=0.01)


def test_project_behind_camera():
    mean, cov, depth, vis = project([[0, 0, -6.]], [[1., 0, 0, 0]], [[-2.] * 3], front_camera())
    assert depth[0] < 0
    assert not vis[0]


def test_empty_cloud():
    out = render(GaussianCloud.empty(sh_degree=0), front_camera(), background=[0.1, 0.2, 0.3])
    assert np.all(out.image == [0.1, 0.2, 0.3])
    assert np.all(out.alpha == 0)
    grads = out.backward(np.ones((16, 16, 3)))
    assert grads['positions'].shape == (0, 3)


def test_single_splat():
    cam = front_camera()
    cloud = single([0, 0, 0], np.log(0.1), 0., [1, 1, 1])
    out = render(cloud, cam)
    assert out.image[8, 8] == pytest.approx([0.5] * 3)
    conic = np.linalg.inv(project(cloud.positions, cloud.rotations, cloud.log_scales, cam)[1][0])
    assert out.image[8, 9, 0] == pytest.approx(0.5 * np.exp(-0.5 * conic[0, 0]))
    assert out.image[10, 8, 0] == pytest.approx(0.5 * np.exp(-0.5 * 4 * conic[1, 1]))
    assert out.image[8, 12, 0] < out.image[8, 10, 0] < out.image[8, 9, 0]
    assert out.n_contrib[8, 8] == 1


def test_single_splat_clamped():
    out = render(single([0, 0, 0], np.log(0.1), 10., [1, 1, 1]), front_camera())
    assert out.image[8, 8] == pytest.approx([0.99] * 3)


def test_two_gaussians_transmittance():
    front = single([0, 0, 0], np.log(0.1), 20., [1, 0, 0])
    back = single([0, 0, 1], np.log(0.1), 0., [0, 1, 0])
    out = render(back.concatenate(front), front_camera())
    assert out.image[8, 8, 0] == pytest.approx(0.99)
    assert out.image[8, 8, 1] <= 0.01
    assert out.image[8, 8, 1] == pytest.approx(0.5 * 0.01)
    assert out.image[8, 8, 2] == pytest.approx(0, abs=1e-12)


def test_background_shows_through():
    out = render(single([0, 0, 0], np.log(0.1), 0., [0, 0, 0]), front_camera(), background=[1, 1, 1])
    assert out.image[8, 8] == pytest.approx([0.5] * 3)
    assert out.image[0, 0] == pytest.approx([1] * 3, abs=1e-6)


def test_conservation():
    cloud = random_scene(40)
    cloud.opacity_logits += 2
    out = render(cloud, front_camera(48, 40, f=40.), tile_size=8)
    assert out.n_tiles == 6 * 5
    for i in range(out.n_tiles):
        index, weights, t_final = out.weights(i)
        assert np.all(weights >= 0)
        assert np.allclose(weights.sum(axis=1) + t_final, 1, atol=1e-6)
    assert np.all(np.isfinite(out.image))
    assert np.all((out.alpha >= 0) & (out.alpha <= 1))
    assert np.all((out.image >= 0) & (out.image <= 1))


def test_threads_deterministic():
    cloud = random_scene(30)
    cam = front_camera(40, 24, f=30.)
    a = render(cloud, cam, tile_size=8, n_threads=1)
    b = render(cloud, cam, tile_size=8, n_threads=3)
    assert np.array_equal(a.image, b.image)
    ga = a.backward(np.ones(a.image.shape))
    gb = b.backward(np.ones(b.image.shape))
    assert np.array_equal(ga['positions'], gb['positions'])


def test_permutation_invariance():
    cloud = random_scene(30)
    perm = rng.permutation(30)
    cam = front_camera(32, 32, f=30.)
    a = render(cloud, cam)
    b = render(cloud.select(perm), cam)
    assert np.allclose(a.image, b.image, rtol=0, atol=1e-14)


def test_depth_ties_lower_index_first():
    red = single([0, 0, 0], np.log(0.1), 20., [1, 0, 0])
    green = single([0, 0, 0], np.log(0.1), 20., [0, 1, 0])
    assert render(red.concatenate(green), front_camera()).image[8, 8, 0] == pytest.approx(0.99)
    assert render(green.concatenate(red), front_camera()).image[8, 8, 1] == pytest.approx(0.99)


def test_nonfinite_skipped():
    cloud = random_scene(5)
    params = {k: v.copy() for k, v in cloud.parameters().items()}
    params['positions'][2] = np.nan
    params['opacity_logits'][3] = np.inf
    with pytest.warns(RenderDiagnosticsWarning, match='2 Gaussians'):
        out = render(SimpleNamespace(**params), front_camera())
    assert out.n_skipped == 2
    expected = render(cloud.select([0, 1, 4]), front_camera())
    assert np.allclose(out.image, expected.image, atol=1e-14)
    grads = out.backward(np.ones((16, 16, 3)))
    assert np.all(grads['positions'][[2, 3]] == 0)
    assert np.all(np.isfinite(grads['positions']))


def test_zero_gradient():
    cloud = random_scene(6)
    out = render(cloud, front_camera())
    grads = render_backward(out, np.zeros((16, 16, 3)))
    for name in ['positions', 'rotations', 'log_scales', 'opacity_logits', 'sh_coeffs']:
        assert np.all(grads[name] == 0)
    assert grads['sh_dirs'] is None


def test_offscreen_gaussian():
    cloud = random_scene(3, sh_degree=0, spread=0.1)
    cloud = cloud.concatenate(single([30, 0, 0], -2., 0., [1, 1, 1]))
    out = render(cloud, front_camera())
    assert not out.visible[3]
    grads = out.backward(np.ones((16, 16, 3)))
    for name in ['positions', 'rotations', 'log_scales', 'opacity_logits', 'sh_coeffs']:
        assert np.all(grads[name][3] == 0)
        assert np.any(grads[name][:3] != 0)


def test_bad_gradient_shape():
    out = render(random_scene(2), front_camera())
    with pytest.raises(ValueError) as e:
        out.backward(np.zeros((8, 8, 3)))
    assert 'grad_image' in str(e.value)


def gradient_scene():
    cloud = GaussianCloud([[0.2, -0.1, 0.], [-0.3, 0.2, 0.3], [0.05, 0.25, -0.2]],
                          random_unit_quaternions(rng, 3),
                          [[-1.2, -1.6, -1.4], [-1.4, -1.1, -1.8], [-1.7, -1.3, -1.2]],
                          [0.3, -0.2, 0.5],
                          rng.normal(scale=0.15, size=(3, 4, 3)))
    cam = Camera(10., 11., 3.5, 3.6, 8, 8, position=[0.1, -0.05, -4.])
    return cloud, cam


def check_gradients(cloud, cam, sh_dirs=None, **kwargs):
    weights = rng.normal(size=(cam.height, cam.width, 3))

    def loss():
        return np.sum(weights * render(cloud, cam, sh_dirs=sh_dirs, **kwargs).image)

    out = render(cloud, cam, sh_dirs=sh_dirs, **kwargs)
    grads = out.backward(weights)
    tol = dict(rtol=1e-3, atol=1e-6)
    for name, value in cloud.parameters().items():
        num = numerical_gradient(loss, value, eps=1e-6)
        assert np.allclose(grads[name], num, **tol), name
    if sh_dirs is not None:
        assert np.allclose(grads['sh_dirs'], numerical_gradient(loss, sh_dirs, eps=1e-6), **tol)
    return grads


@pytest.mark.parametrize('tile_size', [16, 4])
def test_gradients(tile_size):
    cloud, cam = gradient_scene()
    grads = check_gradients(cloud, cam, tile_size=tile_size)
    assert np.all(grads['densify_stat'] > 0)


def test_gradients_given_directions():
    cloud, cam = gradient_scene()
    dirs = rng.normal(size=(3, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    check_gradients(cloud, cam, sh_dirs=dirs)


def test_gradients_clamped_jacobian():
    '''A large Gaussian outside the field of view that still covers pixels.'''
    cloud, cam = gradient_scene()
    big = GaussianCloud([[2.6, 0.3, 0.1]], np.array([[0.9, 0.1, -0.3, 0.2]]) / np.linalg.norm([0.9, 0.1, -0.3, 0.2]),
                        [[0.1, -0.2, 0.]], [0.1], rng.normal(scale=0.15, size=(1, 4, 3)))
    cloud = cloud.concatenate(big)
    out = render(cloud, cam)
    assert out.visible[3]
    assert project(cloud.positions, cloud.rotations, cloud.log_scales, cam)[0][3, 0] > 8
    check_gradients(cloud, cam)


def test_gradients_with_alpha_clamp():
    cloud, cam = gradient_scene()
    cloud.opacity_logits[:] = [6., 0.2, -0.1]
    grads = check_gradients(cloud, cam)
    assert grads['opacity_logits'][0] != 0


def test_densify_stat():
    cloud, cam = gradient_scene()
    grads = render(cloud, cam).backward(rng.normal(size=(8, 8, 3)))
    expected = np.hypot(grads['means2d'][:, 0] * 4, grads['means2d'][:, 1] * 4)
    assert np.allclose(grads['densify_stat'], expected)


def test_tile_map_order():
    assert tile_map(lambda x: x * 2, list(range(50)), n_threads=4) == list(range(0, 100, 2))
    assert tile_map(lambda x: x, [], n_threads=0) == []


def test_opacity_is_sigmoid():
    out = render(single([0, 0, 0], np.log(0.1), -1.3, [1, 1, 1]), front_camera())
    assert out.image[8, 8, 0] == pytest.approx(sigmoid(-1.3))
