from .spec import (
    APPLICABLE,
    FACTORS,
    CameraSpec,
    FactorToggles,
    LightSpec,
    TextureSpec,
    VisualSpec,
    canonical_spec,
    sample_visual_spec,
)
from .textures import make_background, make_floor_texture
from .render import project_point, render, render_highres
from .scene import canonical_state
from .pixel_env import FewShot, Fixed, PixelEnv, pixel_env

__all__ = [
    "APPLICABLE", "FACTORS", "CameraSpec", "FactorToggles", "LightSpec", "TextureSpec",
    "VisualSpec", "canonical_spec", "sample_visual_spec", "make_background",
    "make_floor_texture", "project_point", "render", "render_highres", "canonical_state",
    "FewShot", "Fixed", "PixelEnv", "pixel_env",
]
