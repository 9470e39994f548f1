"""Deterministic software rasterizer.

Every pixel is the mean of a 4x4 grid of point samples. Each sample is mapped
through the inverse camera into scene coordinates, coloured by the background
(above the horizon) or floor texture, blended with the reflection, then
overdrawn by body primitives in table order. Lighting multiplies every colour
by the brightness and adds a linear directional ramp across each body. The
mean is quantized with ``floor(255 * mean + 0.5)``.

A frame of size S covers scene x in ``[-(S-84)/168, 1 + (S-84)/168]``: larger
renders widen the field of view at the same pixel scale, so the central 84x84
crop of a 100x100 render is the 84x84 render.
"""

import math

import numpy as np

from .. import _accel
from .scene import REFLECT_MIRROR, REFLECT_NONE, build_scene
from .textures import prepare_texture, tex_weight, tex_weight_np

BASE_SIZE = 84
SUPERSAMPLE = 4
SAMPLE_OFFSETS = tuple((k + 0.5) / SUPERSAMPLE for k in range(SUPERSAMPLE))


def camera_inverse(camera) -> np.ndarray:
    """Affine coefficients mapping image-space scene points back to the scene.

    The forward camera is ``p = c + zoom * R(rotation) (s - c) + t`` about the
    frame centre ``c = (0.5, 0.5)``.
    """
    cs = math.cos(camera.rotation) / camera.zoom
    sn = math.sin(camera.rotation) / camera.zoom
    cx = 0.5 + camera.translate_x
    cy = 0.5 + camera.translate_y
    return np.array([cs, sn, 0.5 - cs * cx - sn * cy, -sn, cs, 0.5 + sn * cx - cs * cy])


def project_point(camera, x: float, y: float, size: int = BASE_SIZE) -> tuple[float, float]:
    """Continuous pixel coordinates (column, row) of scene point ``(x, y)``."""
    c, s = math.cos(camera.rotation), math.sin(camera.rotation)
    dx, dy = x - 0.5, y - 0.5
    px = 0.5 + camera.zoom * (c * dx - s * dy) + camera.translate_x
    py = 0.5 + camera.zoom * (s * dx + c * dy) + camera.translate_y
    origin = (size - BASE_SIZE) / 2.0
    return px * BASE_SIZE + origin - 0.5, py * BASE_SIZE + origin - 0.5


def bounding_boxes(prims) -> np.ndarray:
    """Padded (xmin, ymin, xmax, ymax) per primitive; a quick reject only."""
    boxes = np.empty((prims.shape[0], 4))
    pad = 1e-6
    for k, p in enumerate(prims):
        if p[0] == 0.0:
            r = p[5]
            xs, ys = (p[1], p[3]), (p[2], p[4])
        else:
            r = 0.0
            xs, ys = p[1:9:2], p[2:9:2]
        boxes[k] = (min(xs) - r - pad, min(ys) - r - pad, max(xs) + r + pad, max(ys) + r + pad)
    return boxes


# -- numba path ------------------------------------------------------------


@_accel.njit
def _inside(p, x, y):
    if p[0] == 0.0:
        ax, ay, bx, by, r = p[1], p[2], p[3], p[4], p[5]
        dx = bx - ax
        dy = by - ay
        l2 = dx * dx + dy * dy
        t = 0.0
        if l2 > 0.0:
            t = ((x - ax) * dx + (y - ay) * dy) / l2
            t = min(max(t, 0.0), 1.0)
        ex = ax + t * dx - x
        ey = ay + t * dy - y
        return ex * ex + ey * ey <= r * r
    pos = True
    neg = True
    for k in range(4):
        x0 = p[1 + 2 * k]
        y0 = p[2 + 2 * k]
        k1 = (k + 1) % 4
        x1 = p[1 + 2 * k1]
        y1 = p[2 + 2 * k1]
        cr = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
        if cr < 0.0:
            pos = False
        if cr > 0.0:
            neg = False
    return pos or neg


@_accel.njit
def _shade(p, x, y, light):
    d = ((x - p[12]) * light[1] + (y - p[13]) * light[2]) / p[14]
    d = min(max(d, -1.0), 1.0)
    return 1.0 + light[3] * d


@_accel.njit
def _render_kernel(out, origin, cam, horizon, bg_code, bg_fp, bg_lat, bg_c0, bg_c1,
                   fl_code, fl_fp, fl_lat, fl_c0, fl_c1, prims, boxes, light, refl):
    size = out.shape[0]
    n = prims.shape[0]
    bright = light[0]
    mode = refl[0]
    alpha = refl[1]
    keep = 1.0 - alpha
    for i in range(size):
        for j in range(size):
            ar = 0.0
            ag = 0.0
            ab = 0.0
            for sa in range(4):
                py = (i + origin + (sa + 0.5) * 0.25) / 84.0
                for sb in range(4):
                    px = (j + origin + (sb + 0.5) * 0.25) / 84.0
                    qx = cam[0] * px + cam[1] * py + cam[2]
                    qy = cam[3] * px + cam[4] * py + cam[5]
                    if qy < horizon:
                        t = tex_weight(bg_code, bg_fp, bg_lat, qx, qy)
                        r = bg_c0[0] + (bg_c1[0] - bg_c0[0]) * t
                        g = bg_c0[1] + (bg_c1[1] - bg_c0[1]) * t
                        b = bg_c0[2] + (bg_c1[2] - bg_c0[2]) * t
                    else:
                        t = tex_weight(fl_code, fl_fp, fl_lat, qx, qy)
                        r = fl_c0[0] + (fl_c1[0] - fl_c0[0]) * t
                        g = fl_c0[1] + (fl_c1[1] - fl_c0[1]) * t
                        b = fl_c0[2] + (fl_c1[2] - fl_c0[2]) * t
                    r = r * bright
                    g = g * bright
                    b = b * bright
                    if mode != 0.0:
                        reflect = False
                        mx = 0.0
                        my = 0.0
                        if mode == 1.0:
                            if qy > refl[2]:
                                reflect = True
                                mx = qx
                                my = 2.0 * refl[2] - qy
                        elif qy >= horizon:
                            reflect = True
                            mx = qx - refl[2]
                            my = qy - refl[3]
                        if reflect:
                            hit = -1
                            for k in range(n):
                                if (prims[k, 15] != 0.0 and boxes[k, 0] <= mx <= boxes[k, 2]
                                        and boxes[k, 1] <= my <= boxes[k, 3] and _inside(prims[k], mx, my)):
                                    hit = k
                            if hit >= 0:
                                sh = _shade(prims[hit], mx, my, light)
                                r = r * keep + alpha * (prims[hit, 9] * sh * bright)
                                g = g * keep + alpha * (prims[hit, 10] * sh * bright)
                                b = b * keep + alpha * (prims[hit, 11] * sh * bright)
                    for k in range(n):
                        if (boxes[k, 0] <= qx <= boxes[k, 2] and boxes[k, 1] <= qy <= boxes[k, 3]
                                and _inside(prims[k], qx, qy)):
                            sh = _shade(prims[k], qx, qy, light)
                            r = prims[k, 9] * sh * bright
                            g = prims[k, 10] * sh * bright
                            b = prims[k, 11] * sh * bright
                    ar += min(max(r, 0.0), 1.0)
                    ag += min(max(g, 0.0), 1.0)
                    ab += min(max(b, 0.0), 1.0)
            out[i, j, 0] = math.floor(ar * 255.0 / 16.0 + 0.5)
            out[i, j, 1] = math.floor(ag * 255.0 / 16.0 + 0.5)
            out[i, j, 2] = math.floor(ab * 255.0 / 16.0 + 0.5)


# -- numpy path ------------------------------------------------------------


def _inside_np(p, x, y):
    if p[0] == 0.0:
        ax, ay, bx, by, r = p[1], p[2], p[3], p[4], p[5]
        dx = bx - ax
        dy = by - ay
        l2 = dx * dx + dy * dy
        if l2 > 0.0:
            t = ((x - ax) * dx + (y - ay) * dy) / l2
            t = np.minimum(np.maximum(t, 0.0), 1.0)
        else:
            t = np.zeros_like(x)
        ex = ax + t * dx - x
        ey = ay + t * dy - y
        return ex * ex + ey * ey <= r * r
    pos = np.ones(x.shape, dtype=bool)
    neg = np.ones(x.shape, dtype=bool)
    for k in range(4):
        x0, y0 = p[1 + 2 * k], p[2 + 2 * k]
        k1 = (k + 1) % 4
        x1, y1 = p[1 + 2 * k1], p[2 + 2 * k1]
        cr = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
        pos &= ~(cr < 0.0)
        neg &= ~(cr > 0.0)
    return pos | neg


def _shade_np(p, x, y, light):
    d = ((x - p[12]) * light[1] + (y - p[13]) * light[2]) / p[14]
    return 1.0 + light[3] * np.minimum(np.maximum(d, -1.0), 1.0)


def _render_numpy(out, origin, cam, horizon, bg, fl, prims, light, refl):
    size = out.shape[0]
    idx = np.arange(size, dtype=np.float64)
    acc = np.zeros((3, size, size))
    bright = light[0]
    mode, alpha = refl[0], refl[1]
    keep = 1.0 - alpha
    for oa in SAMPLE_OFFSETS:
        py = ((idx + origin + oa) / 84.0)[:, None]
        for ob in SAMPLE_OFFSETS:
            px = ((idx + origin + ob) / 84.0)[None, :]
            qx = cam[0] * px + cam[1] * py + cam[2]
            qy = cam[3] * px + cam[4] * py + cam[5]
            sky = qy < horizon
            t = np.empty(qx.shape)
            t[sky] = tex_weight_np(bg.code, bg.fparams, bg.lattice, qx[sky], qy[sky])
            t[~sky] = tex_weight_np(fl.code, fl.fparams, fl.lattice, qx[~sky], qy[~sky])
            col = []
            for c in range(3):
                v = np.where(sky, bg.c0[c] + (bg.c1[c] - bg.c0[c]) * t, fl.c0[c] + (fl.c1[c] - fl.c0[c]) * t)
                col.append(v * bright)
            if mode != REFLECT_NONE:
                if mode == REFLECT_MIRROR:
                    use = qy > refl[2]
                    mx, my = qx, 2.0 * refl[2] - qy
                else:
                    use = qy >= horizon
                    mx, my = qx - refl[2], qy - refl[3]
                hit = np.full(qx.shape, -1)
                for k in range(prims.shape[0]):
                    if prims[k, 15] != 0.0:
                        hit[use & _inside_np(prims[k], mx, my)] = k
                for k in np.unique(hit[hit >= 0]):
                    m = hit == k
                    sh = _shade_np(prims[k], mx[m], my[m], light)
                    for c in range(3):
                        col[c][m] = col[c][m] * keep + alpha * (prims[k, 9 + c] * sh * bright)
            for k in range(prims.shape[0]):
                m = _inside_np(prims[k], qx, qy)
                if m.any():
                    sh = _shade_np(prims[k], qx[m], qy[m], light)
                    for c in range(3):
                        col[c][m] = prims[k, 9 + c] * sh * bright
            for c in range(3):
                acc[c] += np.minimum(np.maximum(col[c], 0.0), 1.0)
    for c in range(3):
        out[:, :, c] = np.floor(acc[c] * 255.0 / 16.0 + 0.5)


def render(state, spec, domain: str, size: int = BASE_SIZE, backend: str | None = None) -> np.ndarray:
    """Rasterize one frame: (size, size, 3) uint8."""
    prims, horizon, (mode, a, b) = build_scene(domain, state, spec)
    refl = np.array([float(mode), float(spec.reflectance), a, b])
    light = np.array([
        spec.lighting.brightness,
        math.cos(spec.lighting.direction),
        math.sin(spec.lighting.direction),
        spec.lighting.shading,
    ])
    cam = camera_inverse(spec.camera)
    bg = prepare_texture(spec.background)
    fl = prepare_texture(spec.floor)
    origin = -(size - BASE_SIZE) / 2.0
    out = np.zeros((size, size, 3), dtype=np.uint8)
    if backend is None:
        backend = _accel.backend_name()
    if backend == "numba":
        _render_kernel(out, origin, cam, horizon, bg.code, bg.fparams, bg.lattice, bg.c0, bg.c1,
                       fl.code, fl.fparams, fl.lattice, fl.c0, fl.c1, prims, bounding_boxes(prims), light, refl)
    elif backend == "numpy":
        _render_numpy(out, origin, cam, horizon, bg, fl, prims, light, refl)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out


def render_highres(state, spec, domain: str, size: int = 100, backend: str | None = None) -> np.ndarray:
    """Wider-field render at the same pixel scale (the rad_crop source)."""
    return render(state, spec, domain, size=size, backend=backend)
