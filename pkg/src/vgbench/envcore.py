"""Planar continuous-control dynamics: cartpole balance and a two-link reacher.

A physical state is a float64 vector whose layout depends on the domain:

* cartpole: ``[x, x_dot, theta, theta_dot]`` (metres, m/s, radians from
  vertical, rad/s)
* reacher: ``[theta1, theta2, omega1, omega2, target_x, target_y]``

Appearance never enters this module. The dynamics seed only selects initial
states; the transition function is seed-free.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .seeding import keyed_rng, string_code

DOMAINS = ("cartpole", "reacher")
STATE_DIM = {"cartpole": 4, "reacher": 6}
ACTION_DIM = {"cartpole": 1, "reacher": 2}
DEFAULT_FRAME_SKIP = {"cartpole": 8, "reacher": 4}
# 1000 raw sub-steps per episode, so the best achievable return is 1000.
DEFAULT_EPISODE_LENGTH = {"cartpole": 125, "reacher": 250}
DEFAULT_DT = 0.01

# cartpole
GRAVITY = 9.81
CART_MASS = 1.0
POLE_MASS = 0.1
POLE_HALF_LENGTH = 0.5
FORCE_SCALE = 4.0
POLE_DAMPING = 0.5  # 1/s, on the hinge
CART_DAMPING = 0.1  # 1/s
TRACK_LIMIT = 1.8  # inelastic stops at +-TRACK_LIMIT
CENTER_BOUND = 0.25
CENTER_MARGIN = 2.0

# reacher
LINK_LENGTH = (0.12, 0.12)
LINK_MASS = (0.1, 0.1)
JOINT_DAMPING = 0.005  # N m s
TORQUE_SCALE = 0.05  # N m
TARGET_RADIUS = 0.02
TARGET_MARGIN = 0.1
TARGET_RANGE = (0.05, 0.20)  # reachable annulus is [0, 0.24]

RESET_ANGLE = 0.05


class ConfigError(ValueError):
    """Invalid configuration (unknown ids, empty seed sets, bad ranges)."""


@dataclass(frozen=True)
class EnvConfig:
    domain: str
    dynamics_seed: int = 0
    frame_skip: int = field(default=0)
    episode_length: int = field(default=0)
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        if not self.frame_skip:
            object.__setattr__(self, "frame_skip", DEFAULT_FRAME_SKIP[self.domain])
        if not self.episode_length:
            object.__setattr__(self, "episode_length", DEFAULT_EPISODE_LENGTH[self.domain])
        if self.frame_skip < 1 or self.episode_length < 1 or not self.dt > 0:
            raise ConfigError("frame_skip, episode_length and dt must be positive")

    @property
    def action_dim(self) -> int:
        return ACTION_DIM[self.domain]

    @property
    def state_dim(self) -> int:
        return STATE_DIM[self.domain]


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]; values already inside are returned untouched."""
    if -math.pi < theta <= math.pi:
        return theta
    return theta - 2.0 * math.pi * math.ceil((theta - math.pi) / (2.0 * math.pi))


def tolerance(distance: float, bound: float, margin: float, value_at_margin: float = 0.1) -> float:
    """1 inside ``bound``; Gaussian fall-off outside, equal to ``value_at_margin``
    at ``bound + margin``."""
    if distance <= bound:
        return 1.0
    scale = math.sqrt(-2.0 * math.log(value_at_margin))
    x = (distance - bound) / margin * scale
    return math.exp(-0.5 * x * x)


def reset(config: EnvConfig, episode_index: int) -> np.ndarray:
    """Initial state keyed on ``(domain, dynamics_seed, episode_index)``."""
    if episode_index < 0:
        raise ValueError("episode_index must be >= 0")
    rng = keyed_rng(string_code(config.domain), config.dynamics_seed, episode_index)
    if config.domain == "cartpole":
        x, xd, th, thd = rng.uniform(-RESET_ANGLE, RESET_ANGLE, size=4)
        return np.array([x, xd, th, thd], dtype=np.float64)
    th1, th2 = rng.uniform(-math.pi, math.pi, size=2)
    radius = rng.uniform(*TARGET_RANGE)
    phi = rng.uniform(-math.pi, math.pi)
    return np.array(
        [wrap_angle(th1), wrap_angle(th2), 0.0, 0.0, radius * math.cos(phi), radius * math.sin(phi)],
        dtype=np.float64,
    )


def fingertip(state) -> tuple[float, float]:
    th1, th2 = state[0], state[1]
    l1, l2 = LINK_LENGTH
    return (
        l1 * math.cos(th1) + l2 * math.cos(th1 + th2),
        l1 * math.sin(th1) + l2 * math.sin(th1 + th2),
    )


def reward(domain: str, state) -> float:
    """Per-sub-step reward in [0, 1]."""
    if domain == "cartpole":
        upright = max(math.cos(state[2]), 0.0)
        centered = 0.5 * (1.0 + tolerance(abs(state[0]), CENTER_BOUND, CENTER_MARGIN))
        return upright * centered
    fx, fy = fingertip(state)
    dist = math.hypot(fx - state[4], fy - state[5])
    return tolerance(dist, TARGET_RADIUS, TARGET_MARGIN)


def _cartpole_substep(s, u, dt):
    x, xd, th, thd = s
    force = FORCE_SCALE * u[0]
    total = CART_MASS + POLE_MASS
    sin_t = math.sin(th)
    cos_t = math.cos(th)
    temp = (force + POLE_MASS * POLE_HALF_LENGTH * thd * thd * sin_t) / total
    th_acc = (GRAVITY * sin_t - cos_t * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t * cos_t / total)
    )
    x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * th_acc * cos_t / total
    th_acc -= POLE_DAMPING * thd
    x_acc -= CART_DAMPING * xd
    # semi-implicit Euler: velocities first, positions from the new velocities
    xd = xd + dt * x_acc
    thd = thd + dt * th_acc
    x = x + dt * xd
    th = wrap_angle(th + dt * thd)
    if x > TRACK_LIMIT:
        x, xd = TRACK_LIMIT, 0.0
    elif x < -TRACK_LIMIT:
        x, xd = -TRACK_LIMIT, 0.0
    return [x, xd, th, thd]


def _reacher_substep(s, u, dt):
    th1, th2, w1, w2, tx, ty = s
    l1, _ = LINK_LENGTH
    m1, m2 = LINK_MASS
    lc1, lc2 = 0.5 * LINK_LENGTH[0], 0.5 * LINK_LENGTH[1]
    i1 = m1 * LINK_LENGTH[0] ** 2 / 12.0
    i2 = m2 * LINK_LENGTH[1] ** 2 / 12.0
    c2 = math.cos(th2)
    h = m2 * l1 * lc2 * math.sin(th2)
    m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2)
    m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2)
    m22 = i2 + m2 * lc2 * lc2
    tau1 = TORQUE_SCALE * u[0] - JOINT_DAMPING * w1 + h * w2 * (2.0 * w1 + w2)
    tau2 = TORQUE_SCALE * u[1] - JOINT_DAMPING * w2 - h * w1 * w1
    det = m11 * m22 - m12 * m12
    a1 = (m22 * tau1 - m12 * tau2) / det
    a2 = (m11 * tau2 - m12 * tau1) / det
    w1 = w1 + dt * a1
    w2 = w2 + dt * a2
    th1 = wrap_angle(th1 + dt * w1)
    th2 = wrap_angle(th2 + dt * w2)
    return [th1, th2, w1, w2, tx, ty]


_SUBSTEP = {"cartpole": _cartpole_substep, "reacher": _reacher_substep}


def transition(domain: str, state, action, frame_skip: int, dt: float = DEFAULT_DT):
    """Repeat ``action`` for ``frame_skip`` sub-steps.

    Returns the new state and the summed sub-step reward. ``action`` must
    already lie in [-1, 1].
    """
    substep = _SUBSTEP[domain]
    s = [float(v) for v in state]
    u = [float(v) for v in action]
    total = 0.0
    for _ in range(frame_skip):
        s = substep(s, u, dt)
        total += reward(domain, s)
    return np.array(s, dtype=np.float64), total


class Env:
    """Stateful episode driver around :func:`reset` and :func:`transition`.

    One caller at a time. Out-of-range actions are clipped and counted in
    ``clip_count``.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.state = None
        self.t = 0
        self.clip_count = 0

    def reset(self, episode_index: int = 0) -> np.ndarray:
        self.state = reset(self.config, episode_index)
        self.t = 0
        return self.state.copy()

    def step(self, action):
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        if self.t >= self.config.episode_length:
            raise RuntimeError("episode finished; call reset()")
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape[0] != self.config.action_dim:
            raise ValueError(f"expected action of size {self.config.action_dim}, got {a.shape[0]}")
        if np.any(np.abs(a) > 1.0):
            self.clip_count += 1
            a = np.clip(a, -1.0, 1.0)
        self.state, r = transition(self.config.domain, self.state, a, self.config.frame_skip, self.config.dt)
        self.t += 1
        return self.state.copy(), r, self.t >= self.config.episode_length


def random_policy_return(config: EnvConfig, episode_index: int, action_seed: int) -> float:
    """Undiscounted return of a uniform-random policy for one episode."""
    env = Env(config)
    env.reset(episode_index)
    rng = keyed_rng(action_seed, episode_index)
    total, done = 0.0, False
    while not done:
        _, r, done = env.step(rng.uniform(-1.0, 1.0, size=config.action_dim))
        total += r
    return total
