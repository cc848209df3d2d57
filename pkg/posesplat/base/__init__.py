# Licensed under GPL version 3 - see LICENSE.rst
from .base import (DocMeta,
                   ConfigBlock,
                   _parse_position_keywords
                   )
