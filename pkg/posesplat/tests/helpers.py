# Licensed under GPL version 3 - see LICENSE.rst
'''Finite-difference helpers shared by the gradient tests.'''
import numpy as np


def numerical_gradient(func, x, eps=1e-4, index=None):
    '''Central finite-difference gradient of the scalar ``func()`` w.r.t. ``x``.

    ``x`` is perturbed in place and restored afterwards, so ``func`` can read
    it through a closure.

    Parameters
    ----------
    func : callable
        Function without arguments that returns a float.
    x : np.array
        Array that ``func`` depends on.
    eps : float
        Step size.
    index : iterable of tuples or None
        Only evaluate these entries (all entries if ``None``).

    Returns
    -------
    grad : np.array of the same shape as ``x``
        Entries not in ``index`` are zero.
    '''
    grad = np.zeros_like(x, dtype=float)
    if index is None:
        index = np.ndindex(x.shape)
    for i in index:
        orig = x[i]
        x[i] = orig + eps
        fp = func()
        x[i] = orig - eps
        fm = func()
        x[i] = orig
        grad[i] = (fp - fm) / (2 * eps)
    return grad


def directional_derivative(func, arrays, directions, eps=1e-5):
    '''Central difference of ``func()`` along ``directions`` of all ``arrays``.

    Parameters
    ----------
    func : callable
    arrays : list of np.array
        Modified in place and restored.
    directions : list of np.array
        Same shapes as ``arrays``.
    eps : float

    Returns
    -------
    deriv : float
    '''
    orig = [a.copy() for a in arrays]
    for a, o, d in zip(arrays, orig, directions):
        a[...] = o + eps * d
    fp = func()
    for a, o, d in zip(arrays, orig, directions):
        a[...] = o - eps * d
    fm = func()
    for a, o in zip(arrays, orig):
        a[...] = o
    return (fp - fm) / (2 * eps)


def random_unit_quaternions(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1)[:, None]
