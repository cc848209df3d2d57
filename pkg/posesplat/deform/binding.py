# Licensed under GPL version 3 - see LICENSE.rst
'''Binding of Gaussians to the vertices of the canonical body mesh.'''
import numpy as np
from scipy.spatial import cKDTree

__all__ = ['Binding', 'bind', 'knn', 'agent_weights', 'agent_weights_backward']


def knn(queries, points, k):
    '''Exact k nearest neighbors, ties broken by the lower point index.

    Parameters
    ----------
    queries : np.array of shape (N, 3)
    points : np.array of shape (V, 3)
    k : int

    Returns
    -------
    index : np.array of shape (N, k)
        Sorted by distance.
    dist : np.array of shape (N, k)
    '''
    points = np.asanyarray(points, dtype=float)
    queries = np.asanyarray(queries, dtype=float).reshape(-1, 3)
    if k > len(points):
        raise ValueError('k={0} is larger than the number of points ({1}).'.format(k, len(points)))
    if len(queries) == 0:
        return np.zeros((0, k), dtype=int), np.zeros((0, k))
    # a few extra candidates so that ties at the k-th place are resolved
    n_cand = min(len(points), k + 4)
    _, cand = cKDTree(points).query(queries, k=n_cand)
    cand = cand.reshape(len(queries), n_cand)
    dist = np.linalg.norm(queries[:, None, :] - points[cand], axis=2)
    order = np.lexsort((cand, dist), axis=1)[:, :k]
    index = np.take_along_axis(cand, order, axis=1)
    return index, np.take_along_axis(dist, order, axis=1)


class Binding:
    '''Nearest canonical vertices of each Gaussian.

    Parameters
    ----------
    neighbors : np.array of shape (N, k)
        Vertex indices sorted by distance; the first column is the
        agent vertex.
    sigma : float
        Width of the agent weights.
    '''
    def __init__(self, neighbors, sigma=0.1):
        self.neighbors = np.array(neighbors, dtype=int)
        if self.neighbors.ndim != 2:
            raise ValueError('neighbors must have shape (N, k).')
        self.sigma = float(sigma)

    @property
    def nearest(self):
        return self.neighbors[:, 0]

    @property
    def k(self):
        return self.neighbors.shape[1]

    def __len__(self):
        return len(self.neighbors)

    def select(self, index):
        return Binding(self.neighbors[index], self.sigma)

    def concatenate(self, other):
        return Binding(np.vstack([self.neighbors, other.neighbors]), self.sigma)


def bind(positions, canonical_vertices, k=3, sigma=0.1):
    '''Bind Gaussians to their ``k`` nearest canonical vertices.

    Parameters
    ----------
    positions : np.array of shape (N, 3)
        Canonical positions of the Gaussians.
    canonical_vertices : np.array of shape (V, 3)
        Body mesh vertices in the canonical pose.
    k : int
    sigma : float

    Returns
    -------
    binding : `Binding`
    '''
    index, dist = knn(positions, canonical_vertices, k)
    return Binding(index, sigma)


def _weight_terms(positions, neighbors, canonical_vertices, skinning_weights, sigma):
    diff = positions[:, None, :] - canonical_vertices[neighbors]
    dist = np.linalg.norm(diff, axis=2)
    w_agent = skinning_weights[neighbors[:, 0]]
    wdist = np.linalg.norm(w_agent[:, None, :] - skinning_weights[neighbors], axis=2)
    raw = np.exp(-dist * wdist / (2 * sigma**2))
    return diff, dist, wdist, raw


def agent_weights(positions, binding, canonical_vertices, skinning_weights):
    '''Normalized blend weights of the neighbor vertices of each Gaussian.

    The weight of neighbor ``i`` is
    ``exp(-|x - v_i| * |W_agent - W_i| / (2 sigma**2))`` where ``W`` are
    rows of the skinning weights; the weights are normalized to sum to 1.
    The agent vertex itself always has the unnormalized weight 1.

    Parameters
    ----------
    positions : np.array of shape (N, 3)
    binding : `Binding`
    canonical_vertices : np.array of shape (V, 3)
    skinning_weights : np.array of shape (V, J)

    Returns
    -------
    weights : np.array of shape (N, k)
    '''
    raw = _weight_terms(positions, binding.neighbors, canonical_vertices,
                        skinning_weights, binding.sigma)[3]
    return raw / raw.sum(axis=1)[:, None]


def agent_weights_backward(positions, binding, canonical_vertices, skinning_weights, grad):
    '''Gradient of `agent_weights` with respect to positions and vertices.

    Where a Gaussian sits exactly on a neighbor vertex the distance is not
    differentiable; that term contributes no gradient.

    Returns
    -------
    grad_positions : np.array of shape (N, 3)
    grad_vertices : np.array of shape (V, 3)
    '''
    diff, dist, wdist, raw = _weight_terms(positions, binding.neighbors, canonical_vertices,
                                           skinning_weights, binding.sigma)
    total = raw.sum(axis=1)[:, None]
    weights = raw / total
    grad_raw = (grad - np.sum(grad * weights, axis=1)[:, None]) / total
    safe = np.where(dist > 0, dist, 1.)
    grad_dist = np.where(dist > 0, grad_raw * raw * (-wdist / (2 * binding.sigma**2)), 0.)
    g = (grad_dist / safe)[:, :, None] * diff
    grad_vertices = np.zeros_like(canonical_vertices, dtype=float)
    np.add.at(grad_vertices, binding.neighbors.ravel(), -g.reshape(-1, 3))
    return g.sum(axis=1), grad_vertices
