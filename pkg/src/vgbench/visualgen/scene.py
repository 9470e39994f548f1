"""2D scene geometry for each domain.

Scene coordinates: the canonical 84-pixel frame spans the unit square, x to
the right and y downward. Bodies are encoded as rows of a primitive table
consumed by the rasterizer:

    [0]     kind: 0 capsule (segment + radius), 1 convex quad
    [1:9]   capsule: ax, ay, bx, by, r   |  quad: x0, y0, ... x3, y3
    [9:12]  rgb in [0, 1]
    [12:14] shading centre
    [14]    shading half-extent
    [15]    1 if the primitive shows up in the floor reflection
"""

import math

import numpy as np

from .. import envcore

PRIM_WIDTH = 16
CAPSULE, QUAD = 0.0, 1.0

# cartpole layout
CART_SCALE = 1.0 / 4.2  # scene units per metre
CART_HORIZON = 0.60
RAIL_Y = 0.74
CART_SIZE = (0.4, 0.2)  # metres
POLE_RADIUS = 0.06
RAIL_COLOR = (0.32, 0.32, 0.32)

# reacher layout (top-down, thin strip of background at the top)
REACH_SCALE = 0.4 / 0.24
REACH_HORIZON = 0.10
REACH_CENTER = (0.5, 0.56)
LINK_RADIUS = 0.012
BASE_RADIUS = 0.018
TIP_RADIUS = 0.016
GHOST_OFFSET = (0.015, 0.02)

REFLECT_NONE, REFLECT_MIRROR, REFLECT_OFFSET = 0, 1, 2


def _capsule(ax, ay, bx, by, r, rgb, casts=1.0):
    row = np.zeros(PRIM_WIDTH)
    row[0] = CAPSULE
    row[1:6] = (ax, ay, bx, by, r)
    row[9:12] = rgb
    row[12:14] = (0.5 * (ax + bx), 0.5 * (ay + by))
    row[14] = 0.5 * math.hypot(bx - ax, by - ay) + r
    row[15] = casts
    return row


def _rect(cx, cy, hw, hh, rgb, casts=1.0):
    row = np.zeros(PRIM_WIDTH)
    row[0] = QUAD
    row[1:9] = (cx - hw, cy - hh, cx + hw, cy - hh, cx + hw, cy + hh, cx - hw, cy + hh)
    row[9:12] = rgb
    row[12:14] = (cx, cy)
    row[14] = max(hw, hh)
    row[15] = casts
    return row


def cartpole_scene(state, body_color):
    x, _, theta, _ = state[:4]
    cw = CART_SIZE[0] * CART_SCALE
    ch = CART_SIZE[1] * CART_SCALE
    cx = 0.5 + x * CART_SCALE
    span = (envcore.TRACK_LIMIT + CART_SIZE[0]) * CART_SCALE
    pivot_y = RAIL_Y - ch
    length = 2.0 * envcore.POLE_HALF_LENGTH * CART_SCALE
    tip_x = cx + length * math.sin(theta)
    tip_y = pivot_y - length * math.cos(theta)
    prims = [
        _rect(0.5, RAIL_Y, span, 0.006, RAIL_COLOR, casts=0.0),
        _rect(cx, RAIL_Y - 0.5 * ch, 0.5 * cw, 0.5 * ch, body_color),
        _capsule(cx, pivot_y, tip_x, tip_y, POLE_RADIUS * CART_SCALE, body_color),
    ]
    return np.stack(prims), CART_HORIZON, (REFLECT_MIRROR, RAIL_Y, 0.0)


def reacher_scene(state, body_color, target_color):
    th1, th2 = state[0], state[1]
    l1, l2 = envcore.LINK_LENGTH
    ox, oy = REACH_CENTER
    s = REACH_SCALE

    def to_scene(px, py):
        return ox + px * s, oy - py * s

    ex, ey = to_scene(l1 * math.cos(th1), l1 * math.sin(th1))
    fx, fy = to_scene(*envcore.fingertip(state))
    tx, ty = to_scene(state[4], state[5])
    prims = [
        _capsule(tx, ty, tx, ty, envcore.TARGET_RADIUS * s, target_color),
        _capsule(ox, oy, ex, ey, LINK_RADIUS * s, body_color),
        _capsule(ex, ey, fx, fy, LINK_RADIUS * s, body_color),
        _capsule(ox, oy, ox, oy, BASE_RADIUS * s, body_color),
        _capsule(fx, fy, fx, fy, TIP_RADIUS * s, body_color),
    ]
    return np.stack(prims), REACH_HORIZON, (REFLECT_OFFSET, GHOST_OFFSET[0], GHOST_OFFSET[1])


def build_scene(domain, state, spec):
    """Primitive table, horizon line and reflection rule for one state."""
    if domain == "cartpole":
        return cartpole_scene(state, spec.body_color)
    return reacher_scene(state, spec.body_color, spec.target_color)


def canonical_state(domain):
    """A fixed, clearly visible pose used by galleries and analyses."""
    if domain == "cartpole":
        return np.array([0.3, 0.0, 0.25, 0.0])
    return np.array([0.6, 1.1, 0.0, 0.0, -0.08, 0.12])
