# Licensed under GPL version 3 - see LICENSE.rst
'''8-bit PNG images.

Images are float arrays in [0, 1] in memory. They are stored with 8 bits
per channel; `quantize` gives the values that a write followed by a read
returns, so that rendered images can be compared with decoded frames.
'''
import numpy as np
from matplotlib import image as mimage
from scipy import ndimage

from ..utils import DatasetError
from .utils import atomic_path

__all__ = ['quantize', 'to_uint8', 'resize_image', 'read_image', 'write_image', 'read_mask',
           'write_mask']


def to_uint8(image):
    return np.round(np.clip(np.asanyarray(image, dtype=float), 0., 1.) * 255).astype(np.uint8)


def quantize(image):
    '''Round ``image`` to the values that survive a round trip through a PNG file.'''
    return to_uint8(image) / 255.


def write_image(image, filename):
    '''Write an (H, W, 3) image in [0, 1] as PNG.'''
    image = np.asanyarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError('image must have shape (H, W, 3), not {0}.'.format(image.shape))
    with atomic_path(filename) as tmp:
        mimage.imsave(tmp, to_uint8(image), format='png')


def _read(filename):
    try:
        data = mimage.imread(filename, format='png')
    except (OSError, ValueError, SyntaxError) as e:
        raise DatasetError('Cannot read image {0}: {1}'.format(filename, e)) from None
    if data.dtype != np.uint8:
        data = np.round(data * 255).astype(np.uint8)
    if data.ndim == 2:
        data = np.stack([data] * 3, axis=-1)
    return data[:, :, :3] / 255.


def resize_image(image, width, height):
    '''Resample an (H, W, 3) image or an (H, W) mask to a new size.

    Pixels are treated as areas, so pixel centers map the same way as in
    `posesplat.render.Camera.resized`. When shrinking, the image is
    smoothed first to avoid aliasing.
    '''
    image = np.asanyarray(image, dtype=float)
    zoom = [height / image.shape[0], width / image.shape[1]] + [1] * (image.ndim - 2)
    sigma = [max(0., 0.5 * (1 / z - 1)) for z in zoom[:2]] + [0] * (image.ndim - 2)
    if any(s > 0 for s in sigma):
        image = ndimage.gaussian_filter(image, sigma, mode='nearest')
    out = ndimage.zoom(image, zoom, order=1, mode='nearest', grid_mode=True)
    if out.shape[:2] != (height, width):
        raise ValueError('Cannot resize image of shape {0} to {1}x{2}.'.format(
            image.shape, width, height))
    return np.clip(out, 0., 1.)


def read_image(filename):
    '''Read a PNG as an (H, W, 3) float image in [0, 1].'''
    return _read(filename)


def write_mask(mask, filename):
    '''Write an (H, W) mask in [0, 1] as gray PNG.'''
    mask = np.asanyarray(mask)
    if mask.ndim != 2:
        raise ValueError('mask must have shape (H, W), not {0}.'.format(mask.shape))
    write_image(np.stack([mask] * 3, axis=-1), filename)


def read_mask(filename):
    return _read(filename)[:, :, 0]
