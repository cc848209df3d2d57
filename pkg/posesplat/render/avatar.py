# Licensed under GPL version 3 - see LICENSE.rst
from ..deform import view_directions
from .rasterizer import render

__all__ = ['render_avatar']


def render_avatar(avatar, pose, camera, background=(0., 0., 0.), posed_c=None, **kwargs):
    '''Put ``avatar`` into ``pose`` and render it.

    The SH colors are evaluated along the view directions returned by
    `posesplat.deform.view_directions`.

    Parameters
    ----------
    avatar : `posesplat.deform.Avatar`
    pose : `posesplat.body.PoseState`
    camera : `posesplat.render.Camera`
    background : np.array of shape (3, )
    posed_c : `posesplat.body.PosedBody` or None
        Forward kinematics of the canonical pose, if already computed.
    kwargs
        Passed on to `posesplat.render.render`.

    Returns
    -------
    deformed : `posesplat.deform.DeformedCloud`
    dirs : np.array of shape (N, 3)
    output : `posesplat.render.RenderOutput`
    '''
    if posed_c is None:
        posed_c = avatar.body.pose(avatar.canonical_state())
    deformed = avatar.deform(pose, posed_c=posed_c)
    dirs = view_directions(deformed, camera.center)
    output = render(deformed, camera, background=background, sh_dirs=dirs, **kwargs)
    return deformed, dirs, output
