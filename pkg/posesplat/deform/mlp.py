# Licensed under GPL version 3 - see LICENSE.rst
'''Multilayer perceptron for the pose-dependent non-rigid offsets.

The network is written directly in numpy with an explicit backward pass.
'''
from collections import OrderedDict

import numpy as np

from ..utils import NonFiniteError

__all__ = ['positional_encoding', 'positional_encoding_backward', 'NonRigidMLP']

HEADS = OrderedDict([('dx', 3), ('dr', 4), ('ds', 3)])
'''Output heads and their sizes: position, rotation and log-scale offsets.'''


def positional_encoding(p, n_freqs):
    '''Map coordinates to ``[p, sin(2**k p), cos(2**k p)]`` for k < n_freqs.

    Parameters
    ----------
    p : np.array of shape (N, D)
    n_freqs : int

    Returns
    -------
    enc : np.array of shape (N, D * (1 + 2 * n_freqs))
    '''
    freqs = 2.**np.arange(n_freqs)
    arg = p[:, None, :] * freqs[None, :, None]
    n = len(p)
    return np.hstack([p, np.sin(arg).reshape(n, -1), np.cos(arg).reshape(n, -1)])


def positional_encoding_backward(p, n_freqs, grad):
    '''Gradient of `positional_encoding` with respect to ``p``.'''
    n, d = p.shape
    freqs = 2.**np.arange(n_freqs)
    arg = p[:, None, :] * freqs[None, :, None]
    g_sin = grad[:, d: d + d * n_freqs].reshape(n, n_freqs, d)
    g_cos = grad[:, d + d * n_freqs:].reshape(n, n_freqs, d)
    return grad[:, :d] + np.sum(freqs[None, :, None] * (g_sin * np.cos(arg) - g_cos * np.sin(arg)),
                                axis=1)


class NonRigidMLP:
    '''Predict offsets ``dx``, ``dr``, ``ds`` from a Gaussian and its posed agent vertex.

    Both inputs are positionally encoded and concatenated. The hidden
    layers use ReLU; the encoded input is concatenated again to the input
    of hidden layer ``skip``. The three linear output heads start at zero,
    so an untrained network does not deform anything.

    Parameters
    ----------
    width : int
        Number of units in each hidden layer.
    depth : int
        Number of hidden layers.
    skip : int
        Index of the hidden layer that receives the input again; set to a
        value >= depth for no skip connection.
    n_freqs : int
        Number of frequencies in the positional encoding.
    seed : int
        Seed for the random initialization of the hidden layers.
    '''
    def __init__(self, width=256, depth=8, skip=4, n_freqs=6, seed=0):
        self.width = int(width)
        self.depth = int(depth)
        self.skip = int(skip)
        self.n_freqs = int(n_freqs)
        self.seed = seed
        if self.width < 1 or self.depth < 1 or self.n_freqs < 0:
            raise ValueError('width and depth must be positive and n_freqs non-negative.')
        rng = np.random.default_rng(seed)
        self.params = OrderedDict()
        n_in = self.input_width
        fan = n_in
        for i in range(self.depth):
            if i == self.skip:
                fan += n_in
            # He initialization for ReLU
            self.params['w{0}'.format(i)] = rng.normal(scale=np.sqrt(2. / fan), size=(fan, self.width))
            self.params['b{0}'.format(i)] = np.zeros(self.width)
            fan = self.width
        for name, size in HEADS.items():
            self.params['w_' + name] = np.zeros((self.width, size))
            self.params['b_' + name] = np.zeros(size)

    @property
    def input_width(self):
        return 2 * 3 * (1 + 2 * self.n_freqs)

    def describe(self):
        return OrderedDict([('width', self.width), ('depth', self.depth), ('skip', self.skip),
                            ('n_freqs', self.n_freqs), ('seed', self.seed)])

    def set_params(self, params):
        '''Replace the weights, e.g. from a checkpoint.

        Parameters
        ----------
        params : dict
            Arrays with the same names and shapes as ``self.params``.
        '''
        for name, value in self.params.items():
            if name not in params:
                raise KeyError('Weight {0} missing.'.format(name))
            new = np.asanyarray(params[name], dtype=float)
            if new.shape != value.shape:
                raise ValueError('Weight {0} has shape {1}, expected {2}.'.format(
                    name, new.shape, value.shape))
            value[...] = new

    def forward(self, x, v):
        '''Evaluate the network.

        Parameters
        ----------
        x : np.array of shape (N, 3)
            Canonical Gaussian positions.
        v : np.array of shape (N, 3)
            Posed position of the agent vertex of each Gaussian.

        Returns
        -------
        out : dict
            ``dx`` (N, 3), ``dr`` (N, 4) and ``ds`` (N, 3).
        cache : tuple
            Intermediate values for `backward`.
        '''
        enc = np.hstack([positional_encoding(x, self.n_freqs),
                         positional_encoding(v, self.n_freqs)])
        h = enc
        acts = []
        for i in range(self.depth):
            if i == self.skip:
                h = np.hstack([h, enc])
            acts.append(h)
            h = np.maximum(h @ self.params['w{0}'.format(i)] + self.params['b{0}'.format(i)], 0.)
        if not np.all(np.isfinite(h)):
            raise NonFiniteError('Non-finite activations in the non-rigid MLP.',
                                 {'n_nonfinite': int(np.sum(~np.isfinite(h)))})
        out = OrderedDict((name, h @ self.params['w_' + name] + self.params['b_' + name])
                          for name in HEADS)
        return out, (x, v, acts, h)

    def __call__(self, x, v):
        return self.forward(x, v)[0]

    def backward(self, cache, grad_out):
        '''Reverse pass.

        Parameters
        ----------
        cache : tuple
            As returned by `forward`.
        grad_out : dict
            Gradients of the loss with respect to the outputs; missing
            heads count as zero.

        Returns
        -------
        grads : OrderedDict
            Gradient for every array in ``self.params``.
        grad_x, grad_v : np.array of shape (N, 3)
            Gradients with respect to the inputs.
        '''
        x, v, acts, h = cache
        grads = OrderedDict((k, np.zeros_like(p)) for k, p in self.params.items())
        g_h = np.zeros_like(h)
        for name in HEADS:
            if grad_out.get(name) is None:
                continue
            g = grad_out[name]
            grads['w_' + name] = h.T @ g
            grads['b_' + name] = g.sum(axis=0)
            g_h += g @ self.params['w_' + name].T
        n_enc = self.input_width
        g_enc = np.zeros((len(x), n_enc))
        out = h
        for i in range(self.depth - 1, -1, -1):
            g_pre = g_h * (out > 0)
            grads['w{0}'.format(i)] = acts[i].T @ g_pre
            grads['b{0}'.format(i)] = g_pre.sum(axis=0)
            g_in = g_pre @ self.params['w{0}'.format(i)].T
            if i == self.skip:
                g_enc += g_in[:, -n_enc:]
                g_in = g_in[:, :-n_enc]
            if i == 0:
                g_enc += g_in
            else:
                g_h = g_in
                out = acts[i][:, :self.width]
        half = n_enc // 2
        grad_x = positional_encoding_backward(x, self.n_freqs, g_enc[:, :half])
        grad_v = positional_encoding_backward(v, self.n_freqs, g_enc[:, half:])
        return grads, grad_x, grad_v
