# Licensed under GPL version 3 - see LICENSE.rst
'''A procedural humanoid made of tubes.

The body has 17 joints. Each joint owns one tube that starts at the joint
and runs to its first child (or to an end point for the hands, feet and
head). Coordinates are in meters, y points up, the body faces +z and its
left side is at +x. The rest pose is a T-pose; the canonical pose spreads
the legs and lowers the arms a little (a star pose) so that no two limbs
touch.
'''
import numpy as np

from .model import BodyModel

__all__ = ['JOINT_NAMES', 'PARENTS', 'procedural_body', 'star_pose']

JOINT_NAMES = ['pelvis', 'spine', 'chest', 'neck', 'head',
               'l_shoulder', 'l_elbow', 'l_wrist',
               'r_shoulder', 'r_elbow', 'r_wrist',
               'l_hip', 'l_knee', 'l_ankle',
               'r_hip', 'r_knee', 'r_ankle']

PARENTS = np.array([-1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15])

_JOINTS = np.array([[0., 0.95, 0.],
                    [0., 1.10, 0.],
                    [0., 1.30, 0.],
                    [0., 1.50, 0.],
                    [0., 1.58, 0.],
                    [0.18, 1.45, 0.],
                    [0.45, 1.45, 0.],
                    [0.70, 1.45, 0.],
                    [-0.18, 1.45, 0.],
                    [-0.45, 1.45, 0.],
                    [-0.70, 1.45, 0.],
                    [0.09, 0.88, 0.],
                    [0.09, 0.50, 0.],
                    [0.09, 0.09, 0.],
                    [-0.09, 0.88, 0.],
                    [-0.09, 0.50, 0.],
                    [-0.09, 0.09, 0.]])

# end point of the tube of each joint
_ENDS = np.array([_JOINTS[1], _JOINTS[2], _JOINTS[3], _JOINTS[4],
                  [0., 1.80, 0.],
                  _JOINTS[6], _JOINTS[7], [0.84, 1.45, 0.],
                  _JOINTS[9], _JOINTS[10], [-0.84, 1.45, 0.],
                  _JOINTS[12], _JOINTS[13], [0.09, 0.04, 0.16],
                  _JOINTS[15], _JOINTS[16], [-0.09, 0.04, 0.16]])

_RADII = np.array([0.13, 0.14, 0.15, 0.05, 0.09,
                   0.045, 0.04, 0.035, 0.045, 0.04, 0.035,
                   0.075, 0.055, 0.04, 0.075, 0.055, 0.04])


def star_pose(legs=0.4, arms=0.3):
    '''Axis-angle pose that spreads the legs and lowers the arms.

    Parameters
    ----------
    legs : float
        Angle in radians by which each leg is turned away from the body.
    arms : float
        Angle in radians by which each arm is lowered from the T-pose.

    Returns
    -------
    theta : np.array of shape (17, 3)
    '''
    theta = np.zeros((len(JOINT_NAMES), 3))
    theta[JOINT_NAMES.index('l_hip'), 2] = legs
    theta[JOINT_NAMES.index('r_hip'), 2] = -legs
    theta[JOINT_NAMES.index('l_shoulder'), 2] = -arms
    theta[JOINT_NAMES.index('r_shoulder'), 2] = arms
    return theta


def _tube(start, end, radius, spacing, n_around):
    '''Vertices, faces and radial directions of a capped cylinder.

    The first vertex is the center of the start cap, the last vertex the
    center of the end cap.
    '''
    axis = end - start
    length = np.linalg.norm(axis)
    a = axis / length
    helper = np.array([0., 0., 1.]) if abs(a[2]) < 0.9 else np.array([1., 0., 0.])
    u = np.cross(a, helper)
    u /= np.linalg.norm(u)
    w = np.cross(a, u)
    n_rings = max(2, int(np.ceil(length / spacing)) + 1)
    t = np.linspace(0., 1., n_rings)
    phi = np.linspace(0., 2 * np.pi, n_around, endpoint=False)
    radial = np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * w
    rings = start + t[:, None, None] * axis + radius * radial[None, :, :]
    vertices = np.vstack([start, rings.reshape(-1, 3), end])
    directions = np.vstack([np.zeros(3), np.tile(radial, (n_rings, 1)), np.zeros(3)])

    faces = []
    ring = lambda r, k: 1 + r * n_around + (k % n_around)
    for k in range(n_around):
        faces.append([0, ring(0, k + 1), ring(0, k)])
        faces.append([len(vertices) - 1, ring(n_rings - 1, k), ring(n_rings - 1, k + 1)])
        for r in range(n_rings - 1):
            faces.append([ring(r, k), ring(r, k + 1), ring(r + 1, k)])
            faces.append([ring(r, k + 1), ring(r + 1, k + 1), ring(r + 1, k)])
    return vertices, np.array(faces), directions


def _segment_distance(points, start, end):
    '''Distance of each point to the segment from ``start`` to ``end``.'''
    ab = end - start
    t = np.clip((points - start) @ ab / (ab @ ab), 0., 1.)
    return np.linalg.norm(points - (start + t[:, None] * ab), axis=1)


def procedural_body(ring_spacing=0.04, ring_vertices=12, softness=0.02,
                    min_weight=1e-3, n_shape=2):
    '''Build the procedural humanoid.

    Skinning weights are a softmax over the distance of each vertex to the
    surface of every tube, ``exp(-max(d - radius, 0) / softness)``; weights
    below ``min_weight`` are dropped and the rows are normalized again.

    Parameters
    ----------
    ring_spacing : float
        Distance between vertex rings along a tube in meters.
    ring_vertices : int
        Number of vertices in each ring.
    softness : float
        Length scale of the skinning weight falloff in meters.
    min_weight : float
    n_shape : int
        Number of shape directions, 0, 1 or 2. The first changes the body
        height by 10% per unit, the second the girth of all tubes by 20%
        per unit.

    Returns
    -------
    body : `posesplat.body.BodyModel`
    '''
    if n_shape not in (0, 1, 2):
        raise ValueError('n_shape must be 0, 1 or 2.')
    vertices = []
    faces = []
    radial = []
    regressor_vertex = []
    offset = 0
    for j in range(len(JOINT_NAMES)):
        v, f, d = _tube(_JOINTS[j], _ENDS[j], _RADII[j], ring_spacing, ring_vertices)
        regressor_vertex.append(offset)
        vertices.append(v)
        faces.append(f + offset)
        radial.append(d * _RADII[j])
        offset += len(v)
    vertices = np.vstack(vertices)
    faces = np.vstack(faces)
    radial = np.vstack(radial)

    dist = np.stack([_segment_distance(vertices, _JOINTS[j], _ENDS[j]) - _RADII[j]
                     for j in range(len(JOINT_NAMES))], axis=1)
    logits = -np.clip(dist, 0., None) / softness
    weights = np.exp(logits - logits.max(axis=1)[:, None])
    weights /= weights.sum(axis=1)[:, None]
    weights[weights < min_weight] = 0.
    weights /= weights.sum(axis=1)[:, None]

    regressor = np.zeros((len(JOINT_NAMES), len(vertices)))
    regressor[np.arange(len(JOINT_NAMES)), regressor_vertex] = 1.

    shape_dirs = np.zeros((len(vertices), 3, 2))
    shape_dirs[:, 1, 0] = 0.1 * vertices[:, 1]
    shape_dirs[:, :, 1] = 0.2 * radial
    return BodyModel(vertices, faces, _JOINTS, PARENTS, weights,
                     shape_dirs=shape_dirs[:, :, :n_shape], joint_regressor=regressor,
                     canonical_pose=star_pose(), joint_names=JOINT_NAMES)
