# Licensed under GPL version 3 - see LICENSE.rst
'''Adam with named parameter groups that are updated in place.'''
import warnings
from collections import OrderedDict

import numpy as np
from astropy import log

from ..utils import OptimizerWarning

__all__ = ['Adam', 'ParameterGroup', 'expon_lr']


def expon_lr(step, lr_init, lr_final, max_steps):
    '''Log-linear interpolation from ``lr_init`` to ``lr_final``.

    Steps beyond ``max_steps`` use ``lr_final``.
    '''
    if max_steps <= 0:
        return lr_final
    t = np.clip(step / max_steps, 0., 1.)
    return float(np.exp(np.log(lr_init) * (1 - t) + np.log(lr_final) * t))


class ParameterGroup:
    '''One array with its learning rate and Adam moments.

    Parameters
    ----------
    param : np.array
        Updated in place.
    lr : float or np.array
        Learning rate; arrays must broadcast against ``param``.
    normalize : bool
        Scale the rows of ``param`` to unit length after every update
        (for quaternions).
    max_step : float or None
        Clip each element of an update to this magnitude.
    '''
    def __init__(self, param, lr, normalize=False, max_step=None):
        self.param = param
        self.lr = lr
        self.normalize = normalize
        self.max_step = max_step
        self.reset()

    def reset(self, rows=None):
        '''Zero the moments (of some rows) and, for the whole group, the step counter.'''
        if rows is None:
            self.m = np.zeros_like(self.param, dtype=float)
            self.v = np.zeros_like(self.param, dtype=float)
            self.t = 0
        else:
            self.m[rows] = 0
            self.v[rows] = 0


class Adam:
    '''Adam with bias correction.

    Every group keeps its own step counter, so groups that do not receive a
    gradient in a step (e.g. the pose of a frame that was not sampled)
    are left alone.

    Parameters
    ----------
    b1, b2 : float
        Decay rates of the first and second moment.
    eps : float
    '''
    def __init__(self, b1=0.9, b2=0.999, eps=1e-8):
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.groups = OrderedDict()
        self.n_skipped = OrderedDict()

    def add_group(self, name, param, lr, normalize=False, max_step=None):
        if name in self.groups:
            raise ValueError('Parameter group {0} exists already.'.format(name))
        self.groups[name] = ParameterGroup(param, lr, normalize, max_step)
        self.n_skipped[name] = 0

    def __contains__(self, name):
        return name in self.groups

    def set_lr(self, name, lr):
        self.groups[name].lr = lr

    def step(self, grads):
        '''Update all groups that have a gradient.

        Parameters
        ----------
        grads : dict
            Gradient for each group name. Groups that are missing or
            ``None`` are not updated.
        '''
        for name, grad in grads.items():
            if grad is None:
                continue
            if name not in self.groups:
                raise KeyError('No parameter group {0}.'.format(name))
            group = self.groups[name]
            grad = np.asanyarray(grad, dtype=float)
            if grad.shape != group.param.shape:
                raise ValueError('Gradient for {0} has shape {1}, but the parameter has shape {2}.'.format(
                    name, grad.shape, group.param.shape))
            if not np.all(np.isfinite(grad)):
                self.n_skipped[name] += 1
                warnings.warn('Non-finite gradient for parameter group {0}; update skipped '
                              '({1} times so far).'.format(name, self.n_skipped[name]),
                              OptimizerWarning)
                continue
            group.t += 1
            group.m = self.b1 * group.m + (1 - self.b1) * grad
            group.v = self.b2 * group.v + (1 - self.b2) * grad**2
            m_hat = group.m / (1 - self.b1**group.t)
            v_hat = group.v / (1 - self.b2**group.t)
            update = group.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if group.max_step is not None:
                update = np.clip(update, -group.max_step, group.max_step)
            group.param -= update
            if group.normalize:
                group.param /= np.linalg.norm(group.param, axis=-1, keepdims=True)

    def reset_moments(self, name, rows=None):
        self.groups[name].reset(rows)

    def remap_rows(self, name, param, source):
        '''Replace the parameter of a group after rows were added or removed.

        Parameters
        ----------
        name : str
        param : np.array
            New parameter array.
        source : np.array of int
            For each row of ``param`` the row of the old array whose moments
            it inherits, or -1 for rows that start with zero moments.
        '''
        group = self.groups[name]
        source = np.asanyarray(source, dtype=int)
        if len(source) != len(param):
            raise ValueError('source has {0} entries, but the new parameter has {1} rows.'.format(
                len(source), len(param)))
        m = np.zeros_like(param, dtype=float)
        v = np.zeros_like(param, dtype=float)
        old = source >= 0
        m[old] = group.m[source[old]]
        v[old] = group.v[source[old]]
        group.param, group.m, group.v = param, m, v
        log.debug('Parameter group {0}: {1} -> {2} rows.'.format(name, len(source[old]), len(param)))
