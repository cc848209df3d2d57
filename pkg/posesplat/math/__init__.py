# Licensed under GPL version 3 - see LICENSE.rst
'''Quaternions, homogeneous transforms and spherical harmonics.'''
