"""Pixel POMDP: dynamics from :mod:`vgbench.envcore`, observations rendered
under a visual seed and stacked three frames deep (channel-first, 9 x S x S)."""

from dataclasses import dataclass, field

import numpy as np

from ..envcore import ConfigError, Env, EnvConfig
from ..seeding import keyed_rng
from .render import BASE_SIZE, render
from .spec import FactorToggles, sample_visual_spec

FRAME_STACK = 3


@dataclass(frozen=True)
class Fixed:
    visual_seed: int = 0
    toggles: FactorToggles = field(default_factory=FactorToggles)


@dataclass(frozen=True)
class FewShot:
    """Draw a new visual seed from ``seed_set`` at every reset."""

    seed_set: tuple[int, ...]
    toggles: FactorToggles = field(default_factory=FactorToggles)
    stream_seed: int = 0

    def __post_init__(self):
        if len(self.seed_set) == 0:
            raise ConfigError("FewShot needs a non-empty seed_set")
        object.__setattr__(self, "seed_set", tuple(sorted(set(int(s) for s in self.seed_set))))

    def seed_for_reset(self, reset_index: int) -> int:
        rng = keyed_rng(0xF5, self.stream_seed, reset_index)
        return self.seed_set[int(rng.integers(len(self.seed_set)))]


class PixelEnv:
    def __init__(self, config: EnvConfig, spec_source=None, size: int = BASE_SIZE):
        self.config = config
        self.source = spec_source if spec_source is not None else Fixed()
        self.size = size
        self.env = Env(config)
        self.spec = None
        self.resets = 0
        self._frames = []
        if isinstance(self.source, Fixed):
            self.spec = sample_visual_spec(self.source.visual_seed, self.source.toggles, config.domain)
        elif not isinstance(self.source, FewShot):
            raise ConfigError(f"unsupported spec source {self.source!r}")

    @property
    def action_dim(self) -> int:
        return self.config.action_dim

    @property
    def obs_shape(self) -> tuple[int, int, int]:
        return (3 * FRAME_STACK, self.size, self.size)

    def _frame(self, state):
        return render(state, self.spec, self.config.domain, size=self.size).transpose(2, 0, 1)

    def _obs(self):
        return np.concatenate(self._frames, axis=0)

    def reset(self, episode_index: int | None = None) -> np.ndarray:
        if episode_index is None:
            episode_index = self.resets
        if isinstance(self.source, FewShot):
            seed = self.source.seed_for_reset(self.resets)
            self.spec = sample_visual_spec(seed, self.source.toggles, self.config.domain)
        self.resets += 1
        state = self.env.reset(episode_index)
        frame = self._frame(state)
        self._frames = [frame] * FRAME_STACK
        return self._obs()

    def step(self, action):
        state, reward, done = self.env.step(action)
        self._frames = self._frames[1:] + [self._frame(state)]
        return self._obs(), reward, done

    @property
    def state(self):
        return self.env.state


def pixel_env(config: EnvConfig, spec_source=None, size: int = BASE_SIZE) -> PixelEnv:
    return PixelEnv(config, spec_source, size)
