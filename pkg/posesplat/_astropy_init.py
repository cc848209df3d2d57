# Licensed under GPL version 3 - see LICENSE.rst

__all__ = ['__version__']

try:
    from .version import version as __version__
except ImportError:
    __version__ = ''

import os

# Self test through the astropy runner, i.e. ``posesplat.test()``.
# Recent astropy versions deprecate the runner; the package works without it.
try:
    from astropy.tests.runner import TestRunner
except ImportError:  # pragma: no cover
    pass
else:
    test = TestRunner.make_test_runner_in(os.path.dirname(__file__))
    test.__test__ = False
    __all__ += ['test']
