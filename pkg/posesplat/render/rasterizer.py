# Licensed under GPL version 3 - see LICENSE.rst
'''Tile-based differentiable splatting of 3D Gaussians.

The rasterizer follows the conventions of the 3D Gaussian splatting
reference implementation: EWA projection with a local affine
approximation of the perspective (clamped to 1.3 times the field of
view), a floor of 0.3 px**2 on the diagonal of the projected covariance,
16 x 16 pixel tiles, front-to-back alpha compositing with alpha clamped
to 0.99 and early termination once the transmittance drops below 1e-4.

The forward pass keeps what the backward pass needs in the returned
`RenderOutput`. Both passes work tile by tile; tiles are independent and
are processed in a thread pool. Per-tile results are merged in the fixed
order of the tiles so the result does not depend on the scheduling.
'''
import os
import warnings
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from astropy import log

from .. import conf
from ..gaussians import covariance_from, covariance_backward
from ..math.sh import sh_to_color, sh_to_color_backward
from ..math.utils import norm_vector, norm_vector_backward, sigmoid
from ..utils import RenderDiagnosticsWarning

__all__ = ['project', 'render', 'render_backward', 'RenderOutput', 'tile_map']


def _setting(value, name):
    return getattr(conf, name) if value is None else value


def tile_map(func, items, n_threads=None):
    '''Apply ``func`` to all ``items`` in a thread pool, keeping the order.

    Parameters
    ----------
    func : callable
    items : list
    n_threads : int or None
        Number of worker threads. ``None`` uses ``conf.n_threads``, 0 means
        `os.cpu_count`.

    Returns
    -------
    results : list
    '''
    n_threads = _setting(n_threads, 'n_threads')
    if n_threads == 0:
        n_threads = os.cpu_count() or 1
    if n_threads == 1 or len(items) < 2:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(func, items))


def _project(positions, rotations, log_scales, camera, cov2d_floor):
    '''Projection with everything the backward pass needs.'''
    n = len(positions)
    w2c = camera.world_to_camera
    rot = w2c[:3, :3]
    p = positions @ rot.T + w2c[:3, 3]
    z = p[:, 2]
    in_depth = (z > camera.near) & (z < camera.far)
    zs = np.where(in_depth, z, 1.)
    limx, limy = [1.3 * t for t in camera.tan_half_fov]
    ux = p[:, 0] / zs
    uy = p[:, 1] / zs
    tx = np.clip(ux, -limx, limx)
    ty = np.clip(uy, -limy, limy)

    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = camera.fx / zs
    jac[:, 0, 2] = -camera.fx * tx / zs
    jac[:, 1, 1] = camera.fy / zs
    jac[:, 1, 2] = -camera.fy * ty / zs

    cov3d = covariance_from(log_scales, rotations)
    cov_cam = rot @ cov3d @ rot.T
    cov2d = jac @ cov_cam @ np.swapaxes(jac, 1, 2)
    cov2d[:, 0, 0] += cov2d_floor
    cov2d[:, 1, 1] += cov2d_floor

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    mean2d = np.stack([camera.fx * ux + camera.cx, camera.fy * uy + camera.cy], axis=1)
    visible = in_depth & (det > 0) & np.isfinite(det) & np.all(np.isfinite(mean2d), axis=1)
    det = np.where(visible, det, 1.)
    conic = np.stack([c / det, -b / det, a / det], axis=1)
    mid = 0.5 * (a + c)
    lambda_max = mid + np.sqrt(np.clip(mid**2 - det, 0., None))
    radius = np.where(visible, np.ceil(3 * np.sqrt(np.where(visible, lambda_max, 0.))), 0.)
    return OrderedDict([('rot', rot), ('p', p), ('z', z), ('zs', zs),
                        ('clamped_x', np.abs(ux) > limx), ('clamped_y', np.abs(uy) > limy),
                        ('tx', tx), ('ty', ty), ('jac', jac), ('cov_cam', cov_cam),
                        ('cov2d', cov2d), ('conic', conic), ('mean2d', mean2d),
                        ('radius', radius), ('visible', visible)])


def project(positions, rotations, log_scales, camera, cov2d_floor=None):
    '''Project 3D Gaussians into the image plane.

    Parameters
    ----------
    positions : np.array of shape (N, 3)
    rotations : np.array of shape (N, 4)
    log_scales : np.array of shape (N, 3)
    camera : `posesplat.render.Camera`
    cov2d_floor : float or None
        Added to the diagonal of the projected covariance. Defaults to
        ``conf.cov2d_floor``.

    Returns
    -------
    mean2d : np.array of shape (N, 2)
        Pixel coordinates of the projected centers.
    cov2d : np.array of shape (N, 2, 2)
        Projected covariance in pixels**2.
    depth : np.array of shape (N, )
        Depth along the optical axis.
    visible : np.array of shape (N, )
        ``False`` for Gaussians outside of the depth range of the camera
        (their other outputs are meaningless).
    '''
    proj = _project(np.asanyarray(positions, dtype=float), np.asanyarray(rotations, dtype=float),
                    np.asanyarray(log_scales, dtype=float), camera,
                    _setting(cov2d_floor, 'cov2d_floor'))
    return proj['mean2d'], proj['cov2d'], proj['z'], proj['visible']


class _Tile:
    '''Pixels of one tile and the Gaussians that overlap it.'''
    def __init__(self, x0, x1, y0, y1, index):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        xs, ys = np.meshgrid(np.arange(x0, x1), np.arange(y0, y1))
        self.px = xs.ravel().astype(float)
        self.py = ys.ravel().astype(float)
        self.index = index

    def offsets(self, mean2d):
        m = mean2d[self.index]
        return self.px[:, None] - m[None, :, 0], self.py[:, None] - m[None, :, 1]


class RenderOutput:
    '''Image and the forward state of `render`.

    Attributes
    ----------
    image : np.array of shape (H, W, 3)
    alpha : np.array of shape (H, W)
        Accumulated opacity ``1 - T_final``.
    background : np.array of shape (3, )
    n_contrib : np.array of shape (H, W)
        Number of Gaussians composited into each pixel.
    visible : np.array of shape (N, )
        Gaussians that overlap at least one tile.
    n_skipped : int
        Gaussians skipped because of non-finite parameters.
    '''
    def __init__(self, **kwargs):
        self.__dict__.update(kwargs)

    @property
    def means2d(self):
        return self._proj['mean2d']

    @property
    def radii(self):
        return self._proj['radius']

    @property
    def depths(self):
        return self._proj['z']

    @property
    def n_tiles(self):
        return len(self._tiles)

    def weights(self, tile_number):
        '''Compositing weights ``alpha_i T_i`` and final transmittance of one tile.

        Returns
        -------
        index : np.array of shape (M, )
            Gaussians in compositing order.
        weights : np.array of shape (P, M)
        t_final : np.array of shape (P, )
        '''
        tile = self._tiles[tile_number]
        state = self._states[tile_number]
        return tile.index, state['alpha'] * state['t'], state['t_final']

    def backward(self, grad_image):
        '''Same as `render_backward`.'''
        return render_backward(self, grad_image)


def render(gaussians, camera, background=(0., 0., 0.), sh_dirs=None, tile_size=None,
           transmittance_floor=None, alpha_clamp=None, cov2d_floor=None, n_threads=None):
    '''Render Gaussians into an image.

    Parameters
    ----------
    gaussians : object
        Anything with the attributes ``positions`` (N, 3), ``rotations``
        (N, 4), ``log_scales`` (N, 3), ``opacity_logits`` (N, ) and
        ``sh_coeffs`` (N, B, 3), e.g. a `posesplat.gaussians.GaussianCloud`
        or a `posesplat.deform.DeformedCloud`.
    camera : `posesplat.render.Camera`
    background : np.array of shape (3, )
        Color behind all Gaussians.
    sh_dirs : np.array of shape (N, 3) or None
        Directions along which the SH colors are evaluated. If ``None``,
        the unit vectors from the camera center to the Gaussians are used.
        When given, `render_backward` returns the gradient with respect to
        these directions instead of folding it into the positions.
    tile_size, transmittance_floor, alpha_clamp, cov2d_floor, n_threads
        Default to the values in `posesplat.conf`.

    Returns
    -------
    output : `RenderOutput`
    '''
    tile_size = int(_setting(tile_size, 'tile_size'))
    t_floor = _setting(transmittance_floor, 'transmittance_floor')
    clamp = _setting(alpha_clamp, 'alpha_clamp')
    floor = _setting(cov2d_floor, 'cov2d_floor')
    background = np.broadcast_to(np.asanyarray(background, dtype=float), (3, )).copy()

    positions = np.asanyarray(gaussians.positions, dtype=float)
    rotations = np.asanyarray(gaussians.rotations, dtype=float)
    log_scales = np.asanyarray(gaussians.log_scales, dtype=float)
    opacity_logits = np.asanyarray(gaussians.opacity_logits, dtype=float)
    sh_coeffs = np.asanyarray(gaussians.sh_coeffs, dtype=float)
    n = len(positions)

    finite = (np.all(np.isfinite(positions), axis=1) & np.all(np.isfinite(rotations), axis=1) &
              np.all(np.isfinite(log_scales), axis=1) & np.isfinite(opacity_logits) &
              np.all(np.isfinite(sh_coeffs), axis=(1, 2)))
    if sh_dirs is not None:
        sh_dirs = np.asanyarray(sh_dirs, dtype=float)
        finite &= np.all(np.isfinite(sh_dirs), axis=1)
    n_skipped = int(n - finite.sum())
    if n_skipped > 0:
        warnings.warn('{0} Gaussians with non-finite parameters were skipped.'.format(n_skipped),
                      RenderDiagnosticsWarning)
        positions = np.where(finite[:, None], positions, 0.)
        rotations = np.where(finite[:, None], rotations, [1., 0., 0., 0.])
        log_scales = np.where(finite[:, None], log_scales, 0.)

    with np.errstate(over='ignore', invalid='ignore'):
        proj = _project(positions, rotations, log_scales, camera, floor)
    mean2d, radius = proj['mean2d'], proj['radius']

    width, height = camera.width, camera.height
    tiles_x = -(-width // tile_size)
    tiles_y = -(-height // tile_size)
    with np.errstate(invalid='ignore'):
        rx0 = np.clip(np.floor((mean2d[:, 0] - radius) / tile_size), 0, tiles_x)
        rx1 = np.clip(np.floor((mean2d[:, 0] + radius) / tile_size) + 1, 0, tiles_x)
        ry0 = np.clip(np.floor((mean2d[:, 1] - radius) / tile_size), 0, tiles_y)
        ry1 = np.clip(np.floor((mean2d[:, 1] + radius) / tile_size) + 1, 0, tiles_y)
    touch = finite & proj['visible'] & (rx1 > rx0) & (ry1 > ry0)
    # front to back, ties broken by the lower index
    order = np.lexsort((np.arange(n), proj['z']))
    order = order[touch[order]]

    tiles = []
    for ty in range(tiles_y):
        for tx in range(tiles_x):
            sel = (rx0[order] <= tx) & (tx < rx1[order]) & (ry0[order] <= ty) & (ty < ry1[order])
            tiles.append(_Tile(tx * tile_size, min((tx + 1) * tile_size, width),
                               ty * tile_size, min((ty + 1) * tile_size, height), order[sel]))

    if sh_dirs is None:
        dirs = np.zeros((n, 3))
        dirs[touch] = norm_vector(positions[touch] - camera.center)
    else:
        dirs = np.where(finite[:, None], sh_dirs, 0.)
    colors = np.zeros((n, 3))
    raw_colors = np.zeros((n, 3))
    if touch.any():
        colors[touch], raw_colors[touch] = sh_to_color(sh_coeffs[touch], dirs[touch])
    opacities = sigmoid(opacity_logits)

    def forward_tile(tile):
        if len(tile.index) == 0:
            p = len(tile.px)
            return {'alpha': np.zeros((p, 0)), 'raw': np.zeros((p, 0)), 't': np.zeros((p, 0)),
                    't_final': np.ones(p), 'n': np.zeros(p, dtype=int),
                    'color': np.broadcast_to(background, (p, 3)).copy()}
        dx, dy = tile.offsets(mean2d)
        a, b, c = proj['conic'][tile.index].T
        power = -0.5 * (a * dx**2 + c * dy**2) - b * dx * dy
        raw = opacities[tile.index] * np.exp(power)
        alpha = np.minimum(raw, clamp)
        included = np.cumprod(1. - alpha, axis=1) >= t_floor
        alpha = np.where(included, alpha, 0.)
        t_incl = np.cumprod(1. - alpha, axis=1)
        t = np.hstack([np.ones((len(tile.px), 1)), t_incl[:, :-1]])
        t_final = t_incl[:, -1]
        color = (alpha * t) @ colors[tile.index] + t_final[:, None] * background
        return {'alpha': alpha, 'raw': raw, 't': t, 't_final': t_final,
                'n': included.sum(axis=1), 'color': color}

    states = tile_map(forward_tile, tiles, n_threads)

    image = np.empty((height, width, 3))
    t_final = np.empty((height, width))
    n_contrib = np.zeros((height, width), dtype=int)
    for tile, state in zip(tiles, states):
        shape = (tile.y1 - tile.y0, tile.x1 - tile.x0)
        image[tile.y0:tile.y1, tile.x0:tile.x1] = state['color'].reshape(shape + (3, ))
        t_final[tile.y0:tile.y1, tile.x0:tile.x1] = state['t_final'].reshape(shape)
        n_contrib[tile.y0:tile.y1, tile.x0:tile.x1] = state['n'].reshape(shape)
    log.debug('Rendered {0} of {1} Gaussians into {2} tiles.'.format(touch.sum(), n, len(tiles)))

    return RenderOutput(image=image, alpha=1. - t_final, background=background,
                        n_contrib=n_contrib, visible=touch, n_skipped=n_skipped,
                        camera=camera, alpha_clamp=clamp, n_threads=n_threads,
                        _proj=proj, _tiles=tiles, _states=states,
                        _inputs=OrderedDict([('positions', positions), ('rotations', rotations),
                                             ('log_scales', log_scales),
                                             ('opacity_logits', opacity_logits),
                                             ('sh_coeffs', sh_coeffs)]),
                        _sh_dirs_given=sh_dirs is not None, _dirs=dirs,
                        _colors=colors, _raw_colors=raw_colors, _opacities=opacities)


def _projection_backward(proj, camera, grad_mean2d, grad_conic):
    '''Gradients of camera-frame positions and the 3D covariance.'''
    conic = proj['conic']
    kmat = np.empty((len(conic), 2, 2))
    kmat[:, 0, 0] = conic[:, 0]
    kmat[:, 0, 1] = kmat[:, 1, 0] = conic[:, 1]
    kmat[:, 1, 1] = conic[:, 2]
    gk = np.empty_like(kmat)
    gk[:, 0, 0] = grad_conic[:, 0]
    gk[:, 0, 1] = gk[:, 1, 0] = 0.5 * grad_conic[:, 1]
    gk[:, 1, 1] = grad_conic[:, 2]
    # d(K^-1) = -K dcov K
    grad_cov2d = -kmat @ gk @ kmat

    jac = proj['jac']
    grad_cov_cam = np.swapaxes(jac, 1, 2) @ grad_cov2d @ jac
    grad_jac = 2 * grad_cov2d @ jac @ proj['cov_cam']
    rot = proj['rot']
    grad_cov3d = rot.T @ grad_cov_cam @ rot

    p, zs = proj['p'], proj['zs']
    fx, fy = camera.fx, camera.fy
    gp = np.zeros_like(p)
    gu, gv = grad_mean2d[:, 0], grad_mean2d[:, 1]
    gp[:, 0] += gu * fx / zs
    gp[:, 1] += gv * fy / zs
    gp[:, 2] -= (gu * fx * p[:, 0] + gv * fy * p[:, 1]) / zs**2
    gp[:, 2] -= (grad_jac[:, 0, 0] * fx + grad_jac[:, 1, 1] * fy) / zs**2
    for axis, f, t, clamped in [(0, fx, proj['tx'], proj['clamped_x']),
                                (1, fy, proj['ty'], proj['clamped_y'])]:
        g = grad_jac[:, axis, 2]
        gp[:, axis] -= np.where(clamped, 0., g * f / zs**2)
        gp[:, 2] += g * f * t / zs**2 * np.where(clamped, 1., 2.)
    return gp, grad_cov3d


def render_backward(output, grad_image):
    '''Propagate an image gradient back to the Gaussian parameters.

    Parameters
    ----------
    output : `RenderOutput`
        Result of `render`.
    grad_image : np.array of shape (H, W, 3)
        Gradient of the loss with respect to ``output.image``.

    Returns
    -------
    grads : OrderedDict
        Gradients with respect to ``positions``, ``rotations``,
        ``log_scales``, ``opacity_logits``, ``sh_coeffs`` and ``sh_dirs``
        (``None`` unless directions were passed to `render`), the gradient
        with respect to the projected centers ``means2d`` in pixels, and
        ``densify_stat``: the norm of the center gradient in normalized
        device coordinates, which is what the densification criterion
        accumulates.
    '''
    inputs = output._inputs
    proj = output._proj
    camera = output.camera
    n = len(inputs['positions'])
    grad_image = np.asanyarray(grad_image, dtype=float)
    if grad_image.shape != output.image.shape:
        raise ValueError('grad_image has shape {0}, but the image has shape {1}.'.format(
            grad_image.shape, output.image.shape))
    mean2d = proj['mean2d']
    colors = output._colors
    opacities = output._opacities
    bg = output.background
    clamp = output.alpha_clamp

    def backward_tile(args):
        tile, state = args
        m = len(tile.index)
        if m == 0:
            return None
        g = grad_image[tile.y0:tile.y1, tile.x0:tile.x1].reshape(-1, 3)
        alpha, t, raw = state['alpha'], state['t'], state['raw']
        col = colors[tile.index]
        w = alpha * t
        grad_color = w.T @ g
        gc = g @ col.T
        contrib = w * gc
        after = np.cumsum(contrib[:, ::-1], axis=1)[:, ::-1] - contrib
        after += (state['t_final'] * (g @ bg))[:, None]
        g_alpha = t * gc - after / (1. - alpha)
        g_alpha = np.where((alpha > 0) & (raw < clamp), g_alpha, 0.)
        g_power = g_alpha * raw
        dx, dy = tile.offsets(mean2d)
        a, b, c = proj['conic'][tile.index].T
        g_mean = np.stack([np.sum(g_power * (a * dx + b * dy), axis=0),
                           np.sum(g_power * (b * dx + c * dy), axis=0)], axis=1)
        g_conic = np.stack([np.sum(g_power * -0.5 * dx**2, axis=0),
                            np.sum(g_power * -dx * dy, axis=0),
                            np.sum(g_power * -0.5 * dy**2, axis=0)], axis=1)
        g_opacity = np.sum(g_power, axis=0) * (1. - opacities[tile.index])
        return grad_color, g_mean, g_conic, g_opacity

    results = tile_map(backward_tile, list(zip(output._tiles, output._states)), output.n_threads)

    grad_color = np.zeros((n, 3))
    grad_mean2d = np.zeros((n, 2))
    grad_conic = np.zeros((n, 3))
    grad_opacity = np.zeros(n)
    for tile, res in zip(output._tiles, results):
        if res is None:
            continue
        # indices are unique within a tile
        grad_color[tile.index] += res[0]
        grad_mean2d[tile.index] += res[1]
        grad_conic[tile.index] += res[2]
        grad_opacity[tile.index] += res[3]

    vis = output.visible
    grad_positions = np.zeros((n, 3))
    grad_rotations = np.zeros((n, 4))
    grad_log_scales = np.zeros((n, 3))
    grad_sh = np.zeros_like(inputs['sh_coeffs'])
    grad_dirs = np.zeros((n, 3))
    if vis.any():
        sub = OrderedDict((k, v[vis]) for k, v in proj.items() if k != 'rot')
        sub['rot'] = proj['rot']
        gp, grad_cov3d = _projection_backward(sub, camera, grad_mean2d[vis], grad_conic[vis])
        grad_positions[vis] = gp @ proj['rot']
        grad_log_scales[vis], grad_rotations[vis] = covariance_backward(
            inputs['log_scales'][vis], inputs['rotations'][vis], grad_cov3d)
        grad_sh[vis], grad_dirs[vis] = sh_to_color_backward(
            inputs['sh_coeffs'][vis], output._dirs[vis], output._raw_colors[vis], grad_color[vis])
        if not output._sh_dirs_given:
            grad_positions[vis] += norm_vector_backward(inputs['positions'][vis] - camera.center,
                                                        grad_dirs[vis])

    ndc = grad_mean2d * [0.5 * camera.width, 0.5 * camera.height]
    return OrderedDict([('positions', grad_positions),
                        ('rotations', grad_rotations),
                        ('log_scales', grad_log_scales),
                        ('opacity_logits', grad_opacity),
                        ('sh_coeffs', grad_sh),
                        ('sh_dirs', grad_dirs if output._sh_dirs_given else None),
                        ('means2d', grad_mean2d),
                        ('densify_stat', np.linalg.norm(ndc, axis=1))])
