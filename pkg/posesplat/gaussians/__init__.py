# Licensed under GPL version 3 - see LICENSE.rst
from .cloud import (GaussianCloud, covariance_from, covariance_backward,
                    PARAMETER_NAMES)
