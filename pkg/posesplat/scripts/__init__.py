# Licensed under GPL version 3 - see LICENSE.rst
'''Command line tools.'''
