# Licensed under GPL version 3 - see LICENSE.rst
'''Image losses and image quality metrics.

Images are arrays of shape (H, W) or (H, W, C) with values in [0, 1]. All
losses return the value and the gradient with respect to the first
(rendered) image.
'''
import numpy as np
from scipy.ndimage import correlate1d

__all__ = ['l1_loss', 'ssim', 'ssim_map', 'ssim_loss', 'psnr', 'mse', 'gaussian_window']

C1 = 0.01**2
C2 = 0.03**2


def _check_shapes(rendered, target):
    rendered = np.asanyarray(rendered, dtype=float)
    target = np.asanyarray(target, dtype=float)
    if rendered.shape != target.shape:
        raise ValueError('Images have different shapes: {0} and {1}.'.format(rendered.shape,
                                                                             target.shape))
    return rendered, target


def l1_loss(rendered, target):
    '''Mean absolute difference.

    Returns
    -------
    loss : float
    grad : np.array
        Gradient with respect to ``rendered``; 0 where the images agree.
    '''
    rendered, target = _check_shapes(rendered, target)
    diff = rendered - target
    return np.mean(np.abs(diff)), np.sign(diff) / diff.size


def mse(a, b):
    a, b = _check_shapes(a, b)
    return np.mean((a - b)**2)


def psnr(a, b):
    '''Peak signal to noise ratio in dB for images with a peak value of 1.

    Identical images give ``np.inf``.
    '''
    err = mse(a, b)
    if err == 0:
        return np.inf
    return -10 * np.log10(err)


def gaussian_window(size=11, sigma=1.5):
    '''Normalized 1D Gaussian weights; the 2D window is their outer product.'''
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-x**2 / (2 * sigma**2))
    return w / w.sum()


def _filter(img, window):
    # separable, zero padded; the window is symmetric so this is its own adjoint
    out = correlate1d(img, window, axis=0, mode='constant')
    return correlate1d(out, window, axis=1, mode='constant')


def _ssim_terms(x, y, window):
    mu_x = _filter(x, window)
    mu_y = _filter(y, window)
    pxx = _filter(x * x, window)
    pyy = _filter(y * y, window)
    pxy = _filter(x * y, window)
    a1 = 2 * mu_x * mu_y + C1
    a2 = 2 * (pxy - mu_x * mu_y) + C2
    b1 = mu_x**2 + mu_y**2 + C1
    b2 = (pxx - mu_x**2) + (pyy - mu_y**2) + C2
    return mu_x, mu_y, a1, a2, b1, b2


def ssim_map(a, b, size=11, sigma=1.5):
    '''Local structural similarity for every pixel and channel.'''
    a, b = _check_shapes(a, b)
    mu_x, mu_y, a1, a2, b1, b2 = _ssim_terms(a, b, gaussian_window(size, sigma))
    return a1 * a2 / (b1 * b2)


def ssim(a, b, size=11, sigma=1.5):
    '''Mean structural similarity with an 11 x 11 Gaussian window.

    Constants are ``C1 = 0.01**2`` and ``C2 = 0.03**2`` for a dynamic range
    of 1; the mean is taken over pixels and channels.
    '''
    return np.mean(ssim_map(a, b, size, sigma))


def ssim_loss(rendered, target, size=11, sigma=1.5):
    '''``1 - ssim(rendered, target)`` and its gradient.

    Returns
    -------
    loss : float
    grad : np.array
        Gradient with respect to ``rendered``.
    '''
    x, y = _check_shapes(rendered, target)
    window = gaussian_window(size, sigma)
    mu_x, mu_y, a1, a2, b1, b2 = _ssim_terms(x, y, window)
    s = a1 * a2 / (b1 * b2)
    g = -np.ones_like(s) / s.size
    g_mu = g * s * (2 * mu_y / a1 - 2 * mu_y / a2 - 2 * mu_x / b1 + 2 * mu_x / b2)
    g_pxx = -g * s / b2
    g_pxy = 2 * g * s / a2
    grad = _filter(g_mu, window) + 2 * x * _filter(g_pxx, window) + y * _filter(g_pxy, window)
    return 1. - np.mean(s), grad
