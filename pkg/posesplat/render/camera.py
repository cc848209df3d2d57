# Licensed under GPL version 3 - see LICENSE.rst
'''Pinhole cameras.

Cameras follow the computer-vision convention: in the camera frame the
optical axis is +z, x points to the right in the image and y points down.
Pixel ``(i, j)`` (column, row) has its center at image coordinates
``(i, j)``.
'''
from collections import OrderedDict

import numpy as np

from ..base import _parse_position_keywords
from ..math.utils import e2h, h2e, mat2aff, translation2aff

__all__ = ['Camera', 'look_at']


def look_at(eye, target, up=(0., 1., 0.)):
    '''Orientation of a camera at ``eye`` that looks at ``target``.

    Parameters
    ----------
    eye, target : np.array of shape (3, )
    up : np.array of shape (3, )
        World direction that appears as "up" (negative image y).

    Returns
    -------
    orientation : np.array of shape (3, 3)
        Columns are the camera x, y and z axes in world coordinates.
    '''
    eye = np.asanyarray(eye, dtype=float)
    z = np.asanyarray(target, dtype=float) - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-12:
        raise ValueError('Viewing direction is parallel to the up vector.')
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1)


class Camera:
    '''Pinhole camera.

    The camera is placed with the same keywords as other objects: either
    ``pos4d`` (camera-to-world transform) or ``position`` and
    ``orientation`` (columns are the camera axes in world coordinates).

    Parameters
    ----------
    fx, fy : float
        Focal length in pixels.
    cx, cy : float
        Principal point in pixels.
    width, height : int
        Image size in pixels.
    near, far : float
        Gaussians with a camera-frame depth outside of this range are
        not rendered.
    '''
    def __init__(self, fx, fy, cx, cy, width, height, near=0.01, far=100., **kwargs):
        self.fx = float(fx)
        self.fy = float(fy)
        self.cx = float(cx)
        self.cy = float(cy)
        self.width = int(width)
        self.height = int(height)
        self.near = float(near)
        self.far = float(far)
        self.pos4d = _parse_position_keywords(kwargs)
        if len(kwargs) > 0:
            raise ValueError('Initialization arguments {0} not understood'.format(', '.join(kwargs.keys())))
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError('Focal lengths must be positive.')
        if self.width < 1 or self.height < 1:
            raise ValueError('Image width and height must be at least 1 pixel.')
        if not (0 <= self.near < self.far):
            raise ValueError('Need 0 <= near < far.')

    @classmethod
    def from_fov(cls, fov, width, height, **kwargs):
        '''Camera with the principal point in the image center.

        Parameters
        ----------
        fov : float
            Horizontal field of view in degrees.
        '''
        f = 0.5 * width / np.tan(np.deg2rad(fov) / 2)
        return cls(f, f, (width - 1) / 2, (height - 1) / 2, width, height, **kwargs)

    @classmethod
    def looking_at(cls, eye, target, fov, width, height, up=(0., 1., 0.), **kwargs):
        '''Camera at ``eye`` looking at ``target``.'''
        return cls.from_fov(fov, width, height, position=eye,
                            orientation=look_at(eye, target, up), **kwargs)

    @property
    def camera_to_world(self):
        return self.pos4d

    @property
    def world_to_camera(self):
        '''Inverse of `pos4d`, using that the rotation part is orthonormal.'''
        return mat2aff(self.pos4d[:3, :3].T) @ translation2aff(-self.pos4d[:3, 3])

    @property
    def center(self):
        '''Position of the camera in world coordinates.'''
        return self.pos4d[:3, 3].copy()

    @property
    def tan_half_fov(self):
        '''Tangent of half the field of view in x and y.'''
        return 0.5 * self.width / self.fx, 0.5 * self.height / self.fy

    def to_camera(self, points):
        '''World coordinates to camera coordinates.'''
        return h2e(e2h(points, 1) @ self.world_to_camera.T)

    def to_pixels(self, points):
        '''Project world points. Returns pixel coordinates and depth.'''
        p = self.to_camera(points)
        z = p[..., 2]
        return np.stack([self.fx * p[..., 0] / z + self.cx,
                         self.fy * p[..., 1] / z + self.cy], axis=-1), z

    def resized(self, width, height):
        '''Same camera for an image of a different size.

        Focal lengths and principal point are scaled so that every world
        point falls on the same relative position in the image.
        '''
        sx = width / self.width
        sy = height / self.height
        return Camera(self.fx * sx, self.fy * sy, (self.cx + 0.5) * sx - 0.5,
                      (self.cy + 0.5) * sy - 0.5, width, height, near=self.near, far=self.far,
                      pos4d=self.pos4d.copy())

    def describe(self):
        return OrderedDict([('fx', self.fx), ('fy', self.fy), ('cx', self.cx), ('cy', self.cy),
                            ('width', self.width), ('height', self.height),
                            ('near', self.near), ('far', self.far),
                            ('camera_to_world', self.pos4d.tolist())])

    @classmethod
    def from_description(cls, desc):
        '''Inverse of `describe`.'''
        desc = dict(desc)
        pos4d = desc.pop('camera_to_world')
        return cls(pos4d=pos4d, **desc)

    def __repr__(self):
        return 'Camera({0}x{1}, f=({2:.1f}, {3:.1f}), center={4})'.format(
            self.width, self.height, self.fx, self.fy, self.center)
