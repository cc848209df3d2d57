# Licensed under GPL version 3 - see LICENSE.rst
'''Local rigidity prior on neighboring Gaussians.

Neighbors are found once in canonical space. Every pair ``(i, j)`` carries
the weight ``exp(-lambda_w |x_j - x_i|**2)`` of the canonical distance.
Two losses compare the observed (posed) cloud with the canonical cloud:

- the rotation loss asks neighbors to rotate by the same amount,
- the isometry loss asks neighbors to keep their distance.

Both vanish for any rigid motion of the whole cloud. The weights are
constants for the optimization; the graph is rebuilt after the set of
Gaussians changed.
'''
import numpy as np

from ..deform.binding import knn
from ..math.rotations import quat_mul, quat_mul_backward, quat_conj

__all__ = ['RigidPriorGraph', 'rot_loss', 'iso_loss', 'relative_rotations']


class RigidPriorGraph:
    '''k nearest canonical neighbors of each Gaussian with their weights.

    Parameters
    ----------
    neighbors : np.array of shape (N, k)
    weights : np.array of shape (N, k)
    lambda_w : float
    '''
    def __init__(self, neighbors, weights, lambda_w=2000.):
        self.neighbors = np.array(neighbors, dtype=int)
        self.weights = np.array(weights, dtype=float)
        self.lambda_w = float(lambda_w)
        if self.neighbors.ndim != 2 or self.neighbors.shape != self.weights.shape:
            raise ValueError('neighbors and weights must have the same shape (N, k).')

    @classmethod
    def build(cls, positions, k=5, lambda_w=2000.):
        '''Graph on canonical ``positions``.

        A Gaussian is never its own neighbor. Clouds with ``k`` or fewer
        Gaussians use all the others as neighbors.
        '''
        positions = np.asanyarray(positions, dtype=float)
        n = len(positions)
        k = max(min(k, n - 1), 0)
        if k == 0:
            return cls(np.zeros((n, 0), dtype=int), np.zeros((n, 0)), lambda_w)
        index, dist = knn(positions, positions, k + 1)
        keep = index != np.arange(n)[:, None]
        # self hidden behind more than k coincident points
        keep[keep.all(axis=1), -1] = False
        neighbors = index[keep].reshape(n, k)
        dist = dist[keep].reshape(n, k)
        return cls(neighbors, np.exp(-lambda_w * dist**2), lambda_w)

    def __len__(self):
        return len(self.neighbors)

    @property
    def k(self):
        return self.neighbors.shape[1]

    def _norm(self):
        n_pairs = self.neighbors.size
        return 1. / n_pairs if n_pairs > 0 else 0.

    def check(self, n):
        if len(self) != n:
            raise ValueError('The prior graph has {0} rows, but the cloud has {1} Gaussians.'.format(
                len(self), n))


def relative_rotations(q_c, q_o):
    '''``q_o * conj(q_c)`` with non-negative scalar part, and the signs used.'''
    rel = quat_mul(q_o, quat_conj(q_c))
    sign = np.where(rel[:, 0] < 0, -1., 1.)
    return rel * sign[:, None], sign


def rot_loss(graph, q_c, q_o):
    '''Penalize neighbors that rotate differently.

    Parameters
    ----------
    graph : `RigidPriorGraph`
    q_c, q_o : np.array of shape (N, 4)
        Canonical and observed rotations (unit quaternions).

    Returns
    -------
    loss : float
        ``sum_ij w_ij |r_j - r_i| / (k N)`` with the relative rotations
        ``r = q_o conj(q_c)``, where the sign of ``r_i`` is chosen to
        minimize the distance.
    grad_q_c, grad_q_o : np.array of shape (N, 4)
    '''
    q_c = np.asanyarray(q_c, dtype=float)
    q_o = np.asanyarray(q_o, dtype=float)
    graph.check(len(q_c))
    rel, sign = relative_rotations(q_c, q_o)
    i = np.repeat(np.arange(len(rel)), graph.k)
    j = graph.neighbors.ravel()
    w = graph.weights.ravel() * graph._norm()
    # q and -q are the same rotation; compare each pair in the same hemisphere
    pair_sign = np.where(np.sum(rel[i] * rel[j], axis=1) < 0, -1., 1.)
    diff = rel[j] - pair_sign[:, None] * rel[i]
    dist = np.linalg.norm(diff, axis=1)
    loss = np.sum(w * dist)

    with np.errstate(invalid='ignore', divide='ignore'):
        g = np.where(dist[:, None] > 0, (w / dist)[:, None] * diff, 0.)
    grad_rel = np.zeros_like(rel)
    np.add.at(grad_rel, j, g)
    np.add.at(grad_rel, i, -pair_sign[:, None] * g)
    grad_rel *= sign[:, None]
    grad_q_o, grad_conj = quat_mul_backward(q_o, quat_conj(q_c), grad_rel)
    return loss, quat_conj(grad_conj), grad_q_o


def iso_loss(graph, x_c, x_o):
    '''Penalize changes of the distance between neighbors.

    Parameters
    ----------
    graph : `RigidPriorGraph`
    x_c, x_o : np.array of shape (N, 3)
        Canonical and observed positions.

    Returns
    -------
    loss : float
        ``sum_ij w_ij | |x_o,i - x_o,j| - |x_c,i - x_c,j| | / (k N)``
    grad_x_c, grad_x_o : np.array of shape (N, 3)
        Pairs of coincident points do not contribute to the gradient.
    '''
    x_c = np.asanyarray(x_c, dtype=float)
    x_o = np.asanyarray(x_o, dtype=float)
    graph.check(len(x_c))
    i = np.repeat(np.arange(len(x_c)), graph.k)
    j = graph.neighbors.ravel()
    w = graph.weights.ravel() * graph._norm()
    d_c = x_c[i] - x_c[j]
    d_o = x_o[i] - x_o[j]
    l_c = np.linalg.norm(d_c, axis=1)
    l_o = np.linalg.norm(d_o, axis=1)
    loss = np.sum(w * np.abs(l_o - l_c))

    s = w * np.sign(l_o - l_c)
    grads = []
    for d, length, factor in [(d_c, l_c, -1.), (d_o, l_o, 1.)]:
        with np.errstate(invalid='ignore', divide='ignore'):
            g = np.where(length[:, None] > 0, (factor * s / length)[:, None] * d, 0.)
        out = np.zeros_like(x_c)
        np.add.at(out, i, g)
        np.add.at(out, j, -g)
        grads.append(out)
    return loss, grads[0], grads[1]
