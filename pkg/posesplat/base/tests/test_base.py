# Licensed under GPL version 3 - see LICENSE.rst
import pytest
import numpy as np

from ..base import _parse_position_keywords, ConfigBlock


class Block(ConfigBlock):
    '''Some settings.'''
    alpha = 1.
    beta = 'text'
    flag = True

    def validate(self):
        self._check_positive('alpha')

    def helper(self):
        '''Helper docstring.'''
        return 1


class Derived(Block):
    gamma = None

    def helper(self):
        return 2


def test_defaults_and_override():
    b = Block(alpha=3.)
    assert b.alpha == 3.
    assert b.beta == 'text'
    assert Block.alpha == 1.


def test_unknown_keyword():
    with pytest.raises(ValueError) as e:
        Block(alhpa=3.)
    assert 'alhpa not understood' in str(e.value)


def test_validation():
    with pytest.raises(ValueError) as e:
        Block(alpha=-1)
    assert 'alpha must be positive' in str(e.value)


def test_describe_order():
    d = Derived(gamma=(1, 2)).describe()
    assert list(d.keys()) == ['block', 'alpha', 'beta', 'flag', 'gamma']
    assert d['block'] == 'Derived'
    assert d['gamma'] == (1, 2)


def test_docstring_inherited():
    assert Derived.helper.__doc__ == 'Helper docstring.'


def test_position_keywords():
    rot = np.array([[0., -1, 0], [1, 0, 0], [0, 0, 1]])
    pos4d = _parse_position_keywords({'position': [1., 2, 3], 'orientation': rot})
    assert np.allclose(pos4d[:3, 3], [1, 2, 3])
    assert np.allclose(pos4d[:3, :3], rot)


def test_invalid_pos4d():
    pos4d = np.array([[0,  0, -7.5, -1.35],
                      [0.,  5.5,  0.,  0],
                      [0.,  0.,  4.e-15,  1.4],
                      [0.,  0.,  0.,  1.]])
    with pytest.raises(ValueError) as e:
        _parse_position_keywords({'pos4d': pos4d})
    assert "is invalid" in str(e.value)


def test_pos4d_and_position():
    with pytest.raises(ValueError) as e:
        _parse_position_keywords({'pos4d': np.eye(4), 'position': [0, 0, 1]})
    assert 'cannot be given at the same time' in str(e.value)
