# Licensed under GPL version 3 - see LICENSE.rst
'''Adaptive control of the number of Gaussians.

`densify_and_prune` follows the usual Gaussian splatting rules: Gaussians
with a large average screen-space position gradient are cloned if they are
small and split if they are large, and nearly transparent Gaussians are
removed. `split_with_scale` additionally replaces every Gaussian that is
larger than a fixed threshold by two copies of half the size, which keeps
single Gaussians from covering body parts that move differently.

Both return a `DensifyResult` that tells the caller where each new row
came from, so that optimizer moments and bindings can follow.
'''
from collections import OrderedDict

import numpy as np
from astropy import log

from ..base import ConfigBlock
from ..math.rotations import quat2mat, quat_normalize
from ..math.utils import logit

__all__ = ['DensifyConfig', 'DensifyResult', 'GradientStats', 'densify_and_prune',
           'split_with_scale', 'reset_opacity']


class DensifyConfig(ConfigBlock):
    '''Settings for densification, pruning and opacity resets.'''
    grad_threshold = 2e-4
    '''Threshold on the mean screen-space position gradient (normalized device coordinates).'''
    densify_from = 100
    densify_interval = 100
    densify_until = 1000
    '''Last step at which Gaussians are densified.'''
    opacity_reset_interval = 3000
    prune_opacity = 0.005
    percent_dense = 0.01
    '''Gaussians larger than this fraction of the scene extent are split, smaller ones cloned.'''
    n_split = 2
    split_with_scale = True
    epsilon_scale = 0.01
    '''Largest allowed scale as a fraction of the diagonal of the canonical bounding box.'''

    def validate(self):
        self._check_positive('grad_threshold', 'densify_interval', 'opacity_reset_interval',
                             'prune_opacity', 'percent_dense', 'epsilon_scale')
        self._check_positive('densify_from', 'densify_until', strict=False)
        if self.n_split < 2:
            raise ValueError('n_split must be at least 2.')

    def is_densify_step(self, step):
        return (self.densify_from <= step <= self.densify_until) and step % self.densify_interval == 0


class DensifyResult:
    '''New cloud and the origin of its rows.

    Attributes
    ----------
    cloud : `posesplat.gaussians.GaussianCloud`
    source : np.array of int
        Row of the old cloud that each new row continues unchanged, -1 for
        rows that were created by cloning or splitting.
    parent : np.array of int
        Row of the old cloud that each new row was derived from.
    counts : OrderedDict
        Number of cloned, split, pruned and scale-split Gaussians.
    '''
    def __init__(self, cloud, source, parent, counts):
        self.cloud = cloud
        self.source = np.asanyarray(source, dtype=int)
        self.parent = np.asanyarray(parent, dtype=int)
        self.counts = counts

    def then(self, other):
        '''Compose with a result computed on ``self.cloud``.'''
        source = np.where(other.source >= 0, self.source[np.clip(other.source, 0, None)], -1)
        parent = self.parent[other.parent]
        counts = OrderedDict(self.counts)
        for k, v in other.counts.items():
            counts[k] = counts.get(k, 0) + v
        return DensifyResult(other.cloud, source, parent, counts)


class GradientStats:
    '''Accumulates the densification statistic over the views a Gaussian is visible in.'''
    def __init__(self, n):
        self.accum = np.zeros(n)
        self.denom = np.zeros(n)

    def add(self, stat, visible):
        self.accum[visible] += stat[visible]
        self.denom[visible] += 1

    def mean(self):
        with np.errstate(invalid='ignore', divide='ignore'):
            out = self.accum / self.denom
        return np.where(self.denom > 0, out, 0.)


def _identity(cloud):
    n = len(cloud)
    return DensifyResult(cloud, np.arange(n), np.arange(n), OrderedDict())


def densify_and_prune(cloud, grads, config, extent, rng):
    '''Clone, split and prune Gaussians.

    Parameters
    ----------
    cloud : `posesplat.gaussians.GaussianCloud`
    grads : np.array of shape (N, )
        Mean screen-space position gradient (see `GradientStats`).
    config : `DensifyConfig`
    extent : float
        Size of the scene, e.g. the bounding box diagonal.
    rng : `numpy.random.Generator`
        For the positions of split Gaussians.

    Returns
    -------
    result : `DensifyResult`
    '''
    n = len(cloud)
    grads = np.asanyarray(grads, dtype=float)
    if len(grads) != n:
        raise ValueError('grads has {0} entries for {1} Gaussians.'.format(len(grads), n))
    max_scale = np.max(cloud.scales, axis=1) if n > 0 else np.zeros(0)
    high = grads >= config.grad_threshold
    clone = high & (max_scale <= config.percent_dense * extent)
    split = high & (max_scale > config.percent_dense * extent)

    k = config.n_split
    split_idx = np.repeat(np.nonzero(split)[0], k)
    samples = rng.normal(size=(len(split_idx), 3)) * cloud.scales[split_idx]
    rot = quat2mat(quat_normalize(cloud.rotations[split_idx])) if len(split_idx) else np.zeros((0, 3, 3))
    new = cloud.select(split_idx)
    new.positions = new.positions + np.einsum('nij,nj->ni', rot, samples)
    new.log_scales = new.log_scales - np.log(0.8 * k)

    clone_idx = np.nonzero(clone)[0]
    keep = np.nonzero(~split)[0]
    parent = np.concatenate([keep, clone_idx, split_idx])
    source = np.concatenate([keep, -np.ones(len(clone_idx) + len(split_idx), dtype=int)])
    out = cloud.select(keep).concatenate(cloud.select(clone_idx)).concatenate(new)

    prune = out.opacities < config.prune_opacity
    if prune.all() and len(out) > 0:
        log.warning('All Gaussians are below the pruning opacity; none are removed.')
        prune[:] = False
    alive = np.nonzero(~prune)[0]
    counts = OrderedDict([('cloned', len(clone_idx)), ('split', int(split.sum())),
                          ('pruned', int(prune.sum()))])
    return DensifyResult(out.select(alive), source[alive], parent[alive], counts)


def split_with_scale(cloud, epsilon_scale):
    '''Replace every Gaussian larger than ``epsilon_scale`` by two half-size copies.

    The copies sit at the same position; all other parameters are copied.

    Parameters
    ----------
    cloud : `posesplat.gaussians.GaussianCloud`
    epsilon_scale : float
        Threshold for the largest of the three scales, in scene units.

    Returns
    -------
    result : `DensifyResult`
    '''
    if epsilon_scale <= 0:
        raise ValueError('epsilon_scale must be positive.')
    if len(cloud) == 0:
        return _identity(cloud)
    big = np.max(cloud.log_scales, axis=1) > np.log(epsilon_scale)
    if not big.any():
        return _identity(cloud)
    keep = np.nonzero(~big)[0]
    idx = np.repeat(np.nonzero(big)[0], 2)
    halves = cloud.select(idx)
    halves.log_scales = halves.log_scales - np.log(2.)
    return DensifyResult(cloud.select(keep).concatenate(halves),
                         np.concatenate([keep, -np.ones(len(idx), dtype=int)]),
                         np.concatenate([keep, idx]),
                         OrderedDict([('scale_split', int(big.sum()))]))


def reset_opacity(cloud, max_opacity=0.01):
    '''Limit all opacities to ``max_opacity`` (in place).'''
    np.minimum(cloud.opacity_logits, logit(max_opacity), out=cloud.opacity_logits)
