# Licensed under GPL version 3 - see LICENSE.rst
from .camera import Camera, look_at
from .rasterizer import project, render, render_backward, RenderOutput, tile_map
from .avatar import render_avatar
