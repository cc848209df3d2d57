# Licensed under GPL version 3 - see LICENSE.rst
import numpy as np
import pytest

from ...tests.helpers import numerical_gradient
from ..binding import bind, knn, agent_weights, agent_weights_backward, Binding

rng = np.random.default_rng(8)


def test_coincident_point():
    verts = np.arange(30.).reshape(10, 3)
    b = bind(verts[7:8], verts)
    assert b.nearest[0] == 7
    assert b.k == 3
    assert np.all(b.neighbors[0] == [7, 6, 8])


def test_k1():
    verts = rng.normal(size=(20, 3))
    b = bind(rng.normal(size=(5, 3)), verts, k=1)
    assert np.all(b.neighbors[:, 0] == b.nearest)
    assert b.neighbors.shape == (5, 1)


def test_brute_force():
    verts = rng.random((50, 3))
    queries = rng.random((10, 3))
    index, dist = knn(queries, verts, 3)
    for i in range(10):
        d = np.linalg.norm(verts - queries[i], axis=1)
        expected = np.lexsort((np.arange(50), d))[:3]
        assert np.all(index[i] == expected)
        assert np.allclose(dist[i], d[expected])


def test_ties_lower_index():
    verts = np.array([[1., 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [5, 5, 5]])
    index, dist = knn(np.zeros((1, 3)), verts, 2)
    assert np.all(index[0] == [0, 1])


def test_k_too_large():
    with pytest.raises(ValueError) as e:
        bind(np.zeros((1, 3)), np.zeros((2, 3)), k=3)
    assert 'larger than the number of points' in str(e.value)


def test_bind_idempotent():
    verts = rng.normal(size=(40, 3))
    pos = rng.normal(size=(15, 3))
    assert np.all(bind(pos, verts).neighbors == bind(pos, verts).neighbors)


def test_weight_examples():
    a = 0.1 / np.sqrt(2)
    verts = np.array([[0., 0, 0], [0.1, 0, 0]])
    skin = np.array([[1., 0], [1 - a, a]])
    b = Binding([[0, 1]])
    w = agent_weights(np.zeros((1, 3)), b, verts, skin)
    raw = np.array([1., np.exp(-0.5)])
    assert np.allclose(w[0], raw / raw.sum())
    assert np.allclose(w.sum(axis=1), 1, atol=1e-9)


def scalar_weights(x, nb, verts, skin, sigma):
    raw = []
    for i in nb:
        d = np.sqrt(sum((x[c] - verts[i, c])**2 for c in range(3)))
        s = np.sqrt(sum((skin[nb[0], c] - skin[i, c])**2 for c in range(skin.shape[1])))
        raw.append(np.exp(-d * s / (2 * sigma**2)))
    return np.array(raw) / sum(raw)


def test_weights_convex_many():
    verts = rng.random((200, 3))
    skin = rng.random((200, 5))
    skin /= skin.sum(axis=1)[:, None]
    pos = rng.random((10000, 3))
    b = bind(pos, verts)
    w = agent_weights(pos, b, verts, skin)
    assert np.all(w >= 0)
    assert np.allclose(w.sum(axis=1), 1, atol=1e-12)
    for i in rng.choice(10000, 200, replace=False):
        assert np.allclose(w[i], scalar_weights(pos[i], b.neighbors[i], verts, skin, 0.1),
                           rtol=0, atol=1e-12)


def test_weights_backward():
    verts = rng.random((30, 3))
    skin = rng.random((30, 4))
    skin /= skin.sum(axis=1)[:, None]
    pos = rng.random((6, 3))
    b = bind(pos, verts)
    g = rng.normal(size=(6, 3))

    def loss():
        return np.sum(g * agent_weights(pos, b, verts, skin))

    gp, gv = agent_weights_backward(pos, b, verts, skin, g)
    assert np.allclose(gp, numerical_gradient(loss, pos, eps=1e-6), rtol=1e-4, atol=1e-7)
    assert np.allclose(gv, numerical_gradient(loss, verts, eps=1e-6), rtol=1e-4, atol=1e-7)


def test_select_concatenate():
    b = Binding(np.arange(12).reshape(4, 3), sigma=0.2)
    both = b.concatenate(b.select([1, 3]))
    assert len(both) == 6
    assert both.sigma == 0.2
    assert np.all(both.nearest == [0, 3, 6, 9, 3, 9])
