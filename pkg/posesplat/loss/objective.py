# Licensed under GPL version 3 - see LICENSE.rst
'''The training objective.

``L = L1 + lambda_ssim * L_ssim + lambda_rot * L_rot + lambda_iso * L_iso``
'''
from collections import OrderedDict

from ..base import ConfigBlock
from .image import l1_loss, ssim_loss
from .rigid import rot_loss, iso_loss

__all__ = ['LossConfig', 'LossParts', 'total_loss', 'compute_loss']


class LossConfig(ConfigBlock):
    '''Weights of the loss terms and settings of the rigidity prior.'''
    lambda_ssim = 0.2
    lambda_rot = 1.
    lambda_iso = 1.
    k = 5
    '''Number of canonical neighbors in the rigidity prior.'''
    lambda_w = 2000.
    '''Fall-off of the neighbor weights with the squared canonical distance.'''

    def validate(self):
        self._check_positive('lambda_ssim', 'lambda_rot', 'lambda_iso', 'lambda_w', strict=False)
        self._check_positive('k')

    @property
    def part_weights(self):
        return OrderedDict([('l1', 1.), ('ssim', self.lambda_ssim),
                            ('rot', self.lambda_rot), ('iso', self.lambda_iso)])


class LossParts(OrderedDict):
    '''Values and gradients of the individual loss terms.

    Maps the name of each term (``l1``, ``ssim``, ``rot``, ``iso``) to a
    tuple ``(value, grads)``, where ``grads`` is a dict from the name of
    the input (``image``, ``rotations_canonical``, ``rotations_observed``,
    ``positions_canonical``, ``positions_observed``) to the gradient.
    '''
    def scalars(self):
        return OrderedDict((k, v[0]) for k, v in self.items())


def total_loss(parts, config):
    '''Weighted sum of the loss terms and of their gradients.

    Parameters
    ----------
    parts : `LossParts`
        Terms that are missing count as zero.
    config : `LossConfig`

    Returns
    -------
    loss : float
    grads : dict
        Gradients by input name.
    '''
    weights = config.part_weights
    loss = 0.
    grads = OrderedDict()
    for name, (value, part_grads) in parts.items():
        if name not in weights:
            raise ValueError('Unknown loss term {0}.'.format(name))
        w = weights[name]
        loss += w * value
        for key, g in part_grads.items():
            if key in grads:
                grads[key] = grads[key] + w * g
            else:
                grads[key] = w * g
    return loss, grads


def compute_loss(rendered, target, config, graph=None, q_c=None, q_o=None, x_c=None, x_o=None):
    '''Evaluate all terms of the objective.

    The rigidity terms are only computed if ``graph`` is given and their
    weight is not zero.

    Returns
    -------
    loss : float
    grads : dict
    parts : `LossParts`
    '''
    parts = LossParts()
    value, g = l1_loss(rendered, target)
    parts['l1'] = (value, {'image': g})
    if config.lambda_ssim > 0:
        value, g = ssim_loss(rendered, target)
        parts['ssim'] = (value, {'image': g})
    if graph is not None:
        if config.lambda_rot > 0:
            value, g_c, g_o = rot_loss(graph, q_c, q_o)
            parts['rot'] = (value, {'rotations_canonical': g_c, 'rotations_observed': g_o})
        if config.lambda_iso > 0:
            value, g_c, g_o = iso_loss(graph, x_c, x_o)
            parts['iso'] = (value, {'positions_canonical': g_c, 'positions_observed': g_o})
    loss, grads = total_loss(parts, config)
    return loss, grads, parts
