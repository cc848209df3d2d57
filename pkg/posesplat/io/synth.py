# Licensed under GPL version 3 - see LICENSE.rst
'''Synthetic scenes with a known answer.

`synth_dataset` builds the procedural body, attaches a ground-truth avatar
to it (one opaque Gaussian per body vertex, colored by body part), moves
the body along smooth pose trajectories and renders the frames with
`posesplat.render.render`. The ground-truth avatar is written next to the
dataset as a checkpoint. Rendering that checkpoint against the dataset
reproduces every frame exactly, so a trained avatar can be compared with
a known optimum.
'''
import os
from collections import OrderedDict

import numpy as np
from matplotlib import colormaps
from astropy import log

from ..body import PoseState, procedural_body
from ..deform import Avatar, DeformConfig
from ..gaussians import GaussianCloud
from ..render import Camera, render_avatar, tile_map
from .checkpoint import Checkpoint
from .dataset import Frame, SceneDataset, write_poses
from .images import quantize

__all__ = ['part_colors', 'truth_avatar', 'pose_trajectory', 'orbit_camera',
           'synth_dataset']

TARGET = np.array([0., 0.9, 0.])
'''Point the synthetic cameras look at (about the middle of the body).'''

# amplitude in rad of the swing of each joint around its canonical angle
_AMPLITUDE = {'spine': 0.1, 'chest': 0.1, 'neck': 0.15, 'head': 0.2,
              'l_shoulder': 0.5, 'l_elbow': 0.6, 'r_shoulder': 0.5, 'r_elbow': 0.6,
              'l_hip': 0.35, 'l_knee': 0.5, 'r_hip': 0.35, 'r_knee': 0.5}


def part_colors(body, cmap='tab20'):
    '''RGB color of each vertex, one color per joint that dominates its skinning.'''
    part = np.argmax(body.skinning_weights, axis=1)
    return np.asarray(colormaps[cmap](part % colormaps[cmap].N))[:, :3]


def truth_avatar(body, sh_degree=1, opacity=0.95):
    '''Avatar with one Gaussian per body vertex and no non-rigid offsets.

    The Gaussians sit at the vertices of the body in its canonical pose,
    with the colors from `part_colors`. Only the DC band of the SH is set,
    so the color does not depend on the view direction.
    '''
    verts = body.posed_vertices(body.canonical_state())
    cloud = GaussianCloud.from_points(verts, sh_degree=sh_degree, colors=part_colors(body),
                                      opacity=opacity)
    return Avatar(body, cloud, mlp=None, config=DeformConfig(non_rigid=False))


def pose_trajectory(body, n, rng, speed=1.):
    '''Smooth periodic motion around the canonical pose.

    Every joint listed in the amplitude table swings about two axes with a
    random phase; one period takes ``n / speed`` poses.

    Parameters
    ----------
    body : `posesplat.body.BodyModel`
        A body from `posesplat.body.procedural_body`.
    n : int
        Number of poses.
    rng : `numpy.random.Generator`
    speed : float

    Returns
    -------
    poses : list of `posesplat.body.PoseState`
    '''
    amp = np.zeros((body.n_joints, 3))
    for name, a in _AMPLITUDE.items():
        j = body.joint_names.index(name)
        amp[j, 0] = a
        amp[j, 2] = 0.5 * a
    amp *= rng.uniform(0.5, 1., size=amp.shape)
    phase = rng.uniform(0, 2 * np.pi, size=amp.shape)
    t = 2 * np.pi * speed * np.arange(n) / n
    return [PoseState(body.canonical_pose + amp * np.sin(ti + phase), np.zeros(3))
            for ti in t]


def orbit_camera(angle, resolution, radius=3.2, height=1.1, fov=40.):
    '''Camera on a circle around the body looking at `TARGET`.

    Parameters
    ----------
    angle : float
        Azimuth in rad; 0 is in front of the body (+z).
    resolution : int
        Width and height in pixels.
    '''
    eye = [radius * np.sin(angle), height, radius * np.cos(angle)]
    camera = Camera.looking_at(eye, TARGET, fov=fov, width=resolution, height=resolution)
    # the same floats that a dataset reader gets back from the manifest
    return Camera.from_description(camera.describe())


def synth_dataset(directory, seed=1, n_frames=20, resolution=64, n_novel=4, pose_noise=0.,
                  masks=False, background=(0., 0., 0.), n_threads=None):
    '''Write a synthetic dataset and its ground-truth checkpoint.

    The directory gets the dataset (see `posesplat.io.SceneDataset`), the
    held-out poses in ``poses_novel.json`` and the ground-truth checkpoint in
    ``truth/``. Test frames show the held-out poses from new angles.

    Parameters
    ----------
    directory : str
    seed : int
        Same seed, same files.
    n_frames : int
        Number of training frames, at least 2.
    resolution : int
        Width and height of the frames in pixels.
    n_novel : int
        Number of test frames.
    pose_noise : float
        If positive, the poses in the manifest are perturbed by uniform
        noise in ``[-pose_noise, pose_noise]`` rad; the frames and the
        ground-truth checkpoint use the true poses.
    masks : bool
        Also write foreground masks. The renders are quantized to 8 bit
        before the mask is applied, so with masks the ground-truth avatar no longer
        reproduces the frames exactly.
    background : np.array of shape (3, )
    n_threads : int or None
        Frames are rendered in parallel; see `posesplat.render.tile_map`.

    Returns
    -------
    dataset : `posesplat.io.SceneDataset`
    '''
    if n_frames < 2:
        raise ValueError('n_frames must be at least 2, got {0}.'.format(n_frames))
    if n_novel < 0:
        raise ValueError('n_novel must be non-negative, got {0}.'.format(n_novel))
    rng = np.random.default_rng(seed)
    body = procedural_body()
    truth = truth_avatar(body)
    background = np.broadcast_to(np.asanyarray(background, dtype=float), (3, )).copy()

    poses = pose_trajectory(body, n_frames, rng)
    novel = pose_trajectory(body, n_novel, rng, speed=0.5) if n_novel > 0 else []
    cameras = [orbit_camera(2 * np.pi * i / n_frames, resolution) for i in range(n_frames)]
    offset = rng.uniform(0, 2 * np.pi)
    cameras += [orbit_camera(offset + 2 * np.pi * i / max(n_novel, 1), resolution)
                for i in range(n_novel)]
    all_poses = poses + novel
    posed_c = body.pose(truth.canonical_state())

    def render_frame(i):
        out = render_avatar(truth, all_poses[i], cameras[i], background=background,
                            posed_c=posed_c, n_threads=1)[2]
        return quantize(out.image), out.alpha

    rendered = tile_map(render_frame, list(range(len(all_poses))), n_threads=n_threads)

    frames = []
    for i, (image, alpha) in enumerate(rendered):
        train = i < n_frames
        pose = all_poses[i]
        if train and pose_noise > 0:
            pose = PoseState(pose.theta + rng.uniform(-pose_noise, pose_noise, pose.theta.shape),
                             pose.translation)
        name = '{0}_{1:04d}'.format('train' if train else 'test', i if train else i - n_frames)
        frames.append(Frame(image, cameras[i], pose, mask=alpha if masks else None, name=name,
                            split='train' if train else 'test'))

    meta = OrderedDict([('seed', seed), ('pose_noise', pose_noise)])
    dataset = SceneDataset(body, frames, background=background, beta=truth.beta, meta=meta)
    dataset.write(directory)
    if novel:
        write_poses(novel, os.path.join(directory, 'poses_novel.json'))
    Checkpoint(truth, poses=poses, background=background,
               cameras=cameras[:n_frames]).write(os.path.join(directory, 'truth'))
    log.info('Synthetic scene with {0} training and {1} test frames in {2}.'.format(
        n_frames, n_novel, directory))
    return dataset
