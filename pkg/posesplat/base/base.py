# Licensed under GPL version 3 - see LICENSE.rst
from collections import OrderedDict
import inspect

import numpy as np
from transforms3d import affines

__all__ = ['DocMeta', 'ConfigBlock']


class DocMeta(type):
    '''Metaclass to inherit docstrings when reqired.

    When a derived class overwrites a method that was already defined in its
    base class, the new method usually has the same purpose as the original
    method and often uses the same parameters, too, although the implementation
    differs slightly.  In this case, it should have the same docstring, too.
    This metaclass will look for methods that are undocumented and add the
    docstring of the appropriate parent method to them.

    '''
    def __new__(mcs, name, bases, dict):
        # make a class here with the same method resolution order
        # but no attributes of its own (so that we can make it here without an
        # infinite loop, because making it will also go through this metaclass)
        if name == 'temporaryclass':
            return type.__new__(mcs, name, bases, dict)
        temp = type('temporaryclass', bases, {})
        mro = inspect.getmro(temp)

        for k in dict:
            if hasattr(dict[k], '__doc__') and dict[k].__doc__ is None:
                try:
                    for b in mro:
                        if hasattr(b, k) and (getattr(b, k).__doc__ is not None):
                            dict[k].__doc__ = getattr(b, k).__doc__
                            break
                except AttributeError:
                    pass

        return type.__new__(mcs, name, bases, dict)


_SETTING_TYPES = (bool, int, float, str, tuple, type(None))


class ConfigBlock(metaclass=DocMeta):
    '''Base class for a block of settings with class-level defaults.

    Every public class attribute that holds a plain value (number, string,
    bool, tuple or ``None``) is a setting. Keyword arguments passed to the
    constructor override the class defaults for this instance; any keyword
    that is not a setting raises a `ValueError`, so that typos in a
    configuration file do not go unnoticed.

    Derived classes check their values in `validate`.
    '''

    def __init__(self, **kwargs):
        names = self.setting_names()
        for k in list(kwargs.keys()):
            if k in names:
                setattr(self, k, kwargs.pop(k))
        if len(kwargs) > 0:
            raise ValueError('Initialization arguments {0} not understood'.format(', '.join(kwargs.keys())))
        self.validate()

    @classmethod
    def setting_names(cls):
        '''Names of all settings in definition order, base classes first.'''
        names = []
        for c in reversed(inspect.getmro(cls)):
            for k, v in vars(c).items():
                if k.startswith('_') or k in names:
                    continue
                if isinstance(v, _SETTING_TYPES):
                    names.append(k)
        return names

    def validate(self):
        '''Check the settings and raise `ValueError` for invalid values.'''
        pass

    def _check_positive(self, *names, strict=True):
        for n in names:
            val = getattr(self, n)
            if (val <= 0) if strict else (val < 0):
                raise ValueError('{0} must be {1}, got {2}.'.format(
                    n, 'positive' if strict else 'non-negative', val))

    def describe(self):
        out = OrderedDict(block=self.__class__.__name__)
        for n in self.setting_names():
            out[n] = getattr(self, n)
        return out

    def __repr__(self):
        args = ', '.join('{0}={1!r}'.format(k, v) for k, v in self.describe().items()
                         if k != 'block')
        return '{0}({1})'.format(self.__class__.__name__, args)


def _parse_position_keywords(kwargs):
    '''Parse keywords that place an object in space.

    If ``pos4d`` is given, use that, otherwise look for ``position`` and
    ``orientation``.

    Parameters
    ----------
    pos4d : 4x4 array
        Homogeneous transformation from the local frame of the object to
        the world frame.
    position : 3-d vector in real space
        Origin of the local frame, measured in the world frame.
    orientation : Rotation matrix or ``None``
        Columns are the local axes expressed in the world frame. The
        default is no rotation.

    Returns
    -------
    pos4d : (4, 4) array
    '''
    pos4d = kwargs.pop('pos4d', None)
    if pos4d is None:
        position = kwargs.pop('position', np.zeros(3))
        orientation = kwargs.pop('orientation', np.eye(3))
        pos4d = affines.compose(position, orientation, np.ones(3))
    else:
        if ('position' in kwargs) or ('orientation' in kwargs):
            raise ValueError('If pos4d is specificed, the following keywords cannot be given at the same time: position, orientation.')
        pos4d = np.array(pos4d, dtype=float)

    if pos4d.shape != (4, 4):
        raise ValueError('pos4d must be a 4x4 matrix.')
    rot = pos4d[:3, :3]
    if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-5) or np.linalg.det(rot) <= 0:
        raise ValueError('pos4d matrix is invalid (rotation part is not a proper rotation).')
    return pos4d
