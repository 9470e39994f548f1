"""Procedural texture families for floors and backgrounds.

A texture maps a scene point ``(x, y)`` to a blend weight ``t`` in [0, 1];
the colour is ``c0 + (c1 - c0) * t``. Family parameters are folded into a
fixed-width float vector so that the numba and numpy evaluators share one
argument layout:

=========  ==============================================================
checker    freq, cos a, sin a, off_x, off_y
stripes    freq, cos a, sin a, phase, duty
noise      freq, off_x, off_y   (+ a periodic LATTICE x LATTICE value grid)
linear     cos a, sin a, slope, shift
radial     cx, cy, 1 / radius
=========  ==============================================================

Noise is two octaves (weights 2/3 and 1/3) of smoothstep-interpolated value
noise on a lattice that wraps, so every family tiles without seams.
"""

import math
from functools import lru_cache

import numpy as np

from .. import _accel
from ..envcore import ConfigError
from ..seeding import keyed_rng
from .spec import TEXTURE_FAMILIES, TextureSpec

LATTICE = 32
FAMILY_CODE = {name: i for i, name in enumerate(TEXTURE_FAMILIES)}
_EMPTY_LATTICE = np.zeros((1, 1), dtype=np.float64)


class PreparedTexture:
    __slots__ = ("code", "fparams", "lattice", "c0", "c1")

    def __init__(self, code, fparams, lattice, c0, c1):
        self.code = code
        self.fparams = fparams
        self.lattice = lattice
        self.c0 = c0
        self.c1 = c1


def noise_lattice(lattice_seed: int) -> np.ndarray:
    return keyed_rng(0x7E47, int(lattice_seed)).uniform(0.0, 1.0, size=(LATTICE, LATTICE))


@lru_cache(maxsize=1024)
def prepare_texture(tex: TextureSpec) -> PreparedTexture:
    if tex.family not in FAMILY_CODE:
        raise ConfigError(f"unknown texture family {tex.family!r}; expected one of {TEXTURE_FAMILIES}")
    p = tex.params
    fp = np.zeros(8, dtype=np.float64)
    lattice = _EMPTY_LATTICE
    if tex.family in ("checker", "stripes"):
        fp[:5] = (p[0], math.cos(p[1]), math.sin(p[1]), p[2], p[3])
    elif tex.family == "noise":
        fp[:3] = (p[0], p[2], p[3])
        lattice = noise_lattice(int(p[1]))
    elif tex.family == "linear":
        fp[:4] = (math.cos(p[0]), math.sin(p[0]), p[1], p[2])
    else:
        fp[:3] = (p[0], p[1], 1.0 / p[2])
    c0 = np.asarray(tex.colors[0], dtype=np.float64)
    c1 = np.asarray(tex.colors[1], dtype=np.float64)
    for a in (fp, lattice, c0, c1):
        a.setflags(write=False)
    return PreparedTexture(FAMILY_CODE[tex.family], fp, lattice, c0, c1)


# -- numba scalar form -----------------------------------------------------


@_accel.njit
def _noise_octave(lat, u, v):
    n = lat.shape[0]
    fu = math.floor(u)
    fv = math.floor(v)
    su = u - fu
    sv = v - fv
    su = su * su * (3.0 - 2.0 * su)
    sv = sv * sv * (3.0 - 2.0 * sv)
    i0 = int(fu) % n
    j0 = int(fv) % n
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    top = lat[j0, i0] + (lat[j0, i1] - lat[j0, i0]) * su
    bot = lat[j1, i0] + (lat[j1, i1] - lat[j1, i0]) * su
    return top + (bot - top) * sv


@_accel.njit
def tex_weight(code, fp, lat, x, y):
    if code == 0:
        u = (x * fp[1] + y * fp[2]) * fp[0] + fp[3]
        v = (y * fp[1] - x * fp[2]) * fp[0] + fp[4]
        s = math.floor(u) + math.floor(v)
        return s - 2.0 * math.floor(s * 0.5)
    if code == 1:
        s = (x * fp[1] + y * fp[2]) * fp[0] + fp[3]
        if s - math.floor(s) < fp[4]:
            return 1.0
        return 0.0
    if code == 2:
        u = x * fp[0] + fp[1]
        v = y * fp[0] + fp[2]
        a = _noise_octave(lat, u, v)
        b = _noise_octave(lat, 2.0 * u + 0.5, 2.0 * v + 0.5)
        return (2.0 * a + b) / 3.0
    if code == 3:
        t = 0.5 + fp[3] + fp[2] * ((x - 0.5) * fp[0] + (y - 0.5) * fp[1])
        return min(max(t, 0.0), 1.0)
    dx = x - fp[0]
    dy = y - fp[1]
    return min(math.sqrt(dx * dx + dy * dy) * fp[2], 1.0)


# -- numpy vectorized form -------------------------------------------------


def _noise_octave_np(lat, u, v):
    n = lat.shape[0]
    fu = np.floor(u)
    fv = np.floor(v)
    su = u - fu
    sv = v - fv
    su = su * su * (3.0 - 2.0 * su)
    sv = sv * sv * (3.0 - 2.0 * sv)
    i0 = fu.astype(np.int64) % n
    j0 = fv.astype(np.int64) % n
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    top = lat[j0, i0] + (lat[j0, i1] - lat[j0, i0]) * su
    bot = lat[j1, i0] + (lat[j1, i1] - lat[j1, i0]) * su
    return top + (bot - top) * sv


def tex_weight_np(code, fp, lat, x, y):
    if code == 0:
        u = (x * fp[1] + y * fp[2]) * fp[0] + fp[3]
        v = (y * fp[1] - x * fp[2]) * fp[0] + fp[4]
        s = np.floor(u) + np.floor(v)
        return s - 2.0 * np.floor(s * 0.5)
    if code == 1:
        s = (x * fp[1] + y * fp[2]) * fp[0] + fp[3]
        return np.where(s - np.floor(s) < fp[4], 1.0, 0.0)
    if code == 2:
        u = x * fp[0] + fp[1]
        v = y * fp[0] + fp[2]
        a = _noise_octave_np(lat, u, v)
        b = _noise_octave_np(lat, 2.0 * u + 0.5, 2.0 * v + 0.5)
        return (2.0 * a + b) / 3.0
    if code == 3:
        t = 0.5 + fp[3] + fp[2] * ((x - 0.5) * fp[0] + (y - 0.5) * fp[1])
        return np.minimum(np.maximum(t, 0.0), 1.0)
    dx = x - fp[0]
    dy = y - fp[1]
    return np.minimum(np.sqrt(dx * dx + dy * dy) * fp[2], 1.0)


def shade_texture(tex: PreparedTexture, x, y):
    """Colours (..., 3) of a prepared texture at scene points ``x``, ``y``."""
    t = tex_weight_np(tex.code, tex.fparams, tex.lattice, np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return tex.c0 + (tex.c1 - tex.c0) * t[..., None]


def make_floor_texture(family: str, params, colors):
    """Tiling function ``f(x, y) -> rgb`` over scene coordinates."""
    tex = prepare_texture(TextureSpec(family, tuple(float(p) for p in params), _colors(colors)))
    return lambda x, y: shade_texture(tex, x, y)


def make_background(pattern: str, params, palette, size: int = 84) -> np.ndarray:
    """Background image (size, size, 3) in [0, 1], sampled at pixel centres of
    the unit scene square."""
    tex = prepare_texture(TextureSpec(pattern, tuple(float(p) for p in params), _colors(palette)))
    c = (np.arange(size, dtype=np.float64) + 0.5) / size
    y, x = np.meshgrid(c, c, indexing="ij")
    return shade_texture(tex, x, y)


def _colors(colors):
    c0, c1 = colors
    return (tuple(float(v) for v in c0), tuple(float(v) for v in c1))
