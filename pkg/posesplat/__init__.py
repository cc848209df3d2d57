# Licensed under GPL version 3 - see LICENSE.rst
"""
Pose-guided animatable Gaussian avatars.

This is an Astropy affiliated package.
"""

# Affiliated packages may add whatever they like to this file, but
# should keep this content at the top.
# ----------------------------------------------------------------------------
from ._astropy_init import *
from ._astropy_init import __all__
# ----------------------------------------------------------------------------

from astropy import config as _config


class Conf(_config.ConfigNamespace):
    """
    Configuration parameters for `posesplat`.
    """
    sh_degree = _config.ConfigItem(
        3, 'Degree of the spherical harmonics used for Gaussian colors (0..3).')
    tile_size = _config.ConfigItem(
        16, 'Edge length in pixels of the square tiles used by the rasterizer.')
    n_threads = _config.ConfigItem(
        0, 'Number of worker threads for tiles and frames. 0 uses os.cpu_count().')
    transmittance_floor = _config.ConfigItem(
        1e-4, 'Compositing along a pixel stops once the transmittance falls below this.')
    alpha_clamp = _config.ConfigItem(
        0.99, 'Upper limit for the alpha of a single Gaussian at a pixel.')
    cov2d_floor = _config.ConfigItem(
        0.3, 'Value added to the diagonal of the projected covariance in pixel**2.')


conf = Conf()

__all__ = __all__ + ['conf']
