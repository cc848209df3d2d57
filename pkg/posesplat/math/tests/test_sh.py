# Licensed under GPL version 3 - see LICENSE.rst
import numpy as np
import pytest

from ..sh import (sh_eval, sh_eval_jacobian, sh_to_color, sh_to_color_backward,
                  rgb_to_sh_dc, n_coeffs)
from ...tests.helpers import numerical_gradient

rng = np.random.default_rng(3)


def random_dirs(n):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1)[:, None]


def test_degree_0():
    assert np.allclose(sh_eval(0, random_dirs(4)), 0.2820948)
    assert np.isclose(sh_eval(0, [0, 0, 1.])[0], 1 / (2 * np.sqrt(np.pi)))


def test_degree_1_along_z():
    out = sh_eval(1, np.array([0., 0, 1]))
    assert np.allclose(out[1:], [0, 0.4886025, 0])


def test_length():
    assert sh_eval(3, random_dirs(2)).shape == (2, 16)
    assert n_coeffs(3) == 16


def test_degree_too_high():
    with pytest.raises(ValueError) as e:
        sh_eval(4, np.array([0., 0, 1]))
    assert 'SH degree' in str(e.value)


@pytest.mark.parametrize('degree', [0, 1, 2])
def test_lower_degree_is_prefix(degree):
    d = random_dirs(7)
    assert np.allclose(sh_eval(degree + 1, d)[:, :n_coeffs(degree)], sh_eval(degree, d))


def test_orthonormal():
    '''Monte-Carlo check that the basis is orthonormal on the sphere.'''
    d = random_dirs(200000)
    b = sh_eval(3, d)
    gram = 4 * np.pi * b.T @ b / len(d)
    assert np.allclose(gram, np.eye(16), atol=0.03)


def test_jacobian():
    d = random_dirs(5)
    g = rng.normal(size=(5, 16))

    def loss():
        return np.sum(g * sh_eval(3, d))

    ana = np.einsum('nb,nbk->nk', g, sh_eval_jacobian(3, d))
    assert np.allclose(ana, numerical_gradient(loss, d), rtol=1e-6, atol=1e-9)


def test_color_backward():
    d = random_dirs(6)
    sh = 0.1 * rng.normal(size=(6, 16, 3))
    sh[:, 0, :] = rgb_to_sh_dc(rng.uniform(0.2, 0.8, size=(6, 3)))
    g = rng.normal(size=(6, 3))

    def loss():
        return np.sum(g * sh_to_color(sh, d)[0])

    color, raw = sh_to_color(sh, d)
    gsh, gd = sh_to_color_backward(sh, d, raw, g)
    assert np.allclose(gsh, numerical_gradient(loss, sh), atol=1e-8)
    assert np.allclose(gd, numerical_gradient(loss, d), atol=1e-8)


def test_color_dc_only():
    sh = np.zeros((2, 4, 3))
    sh[:, 0, :] = rgb_to_sh_dc([[0.1, 0.5, 0.9], [1., 0., 0.3]])
    color, raw = sh_to_color(sh, random_dirs(2))
    assert np.allclose(color, [[0.1, 0.5, 0.9], [1., 0., 0.3]])
