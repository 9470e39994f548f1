"""Bounded FIFO replay of (o, a, r, o') transitions.

There is no terminal flag: episodes end on a timer, so bootstrapping always
continues through the reset. Observation storage grows in fixed-size chunks
as the buffer fills, so a large capacity costs nothing until it is used.
"""

import numpy as np

from ..seeding import keyed_rng

CHUNK = 1024


class ReplayBuffer:
    def __init__(self, obs_shape, action_dim: int, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_shape = tuple(obs_shape)
        self._obs: list[np.ndarray] = []
        self._next: list[np.ndarray] = []
        self.actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros((capacity, 1), dtype=np.float32)
        self.idx = 0
        self.full = False
        self.inserted = 0

    def __len__(self):
        return self.capacity if self.full else self.idx

    def _slot(self, i):
        c, j = divmod(i, CHUNK)
        while len(self._obs) <= c:
            n = min(CHUNK, self.capacity - len(self._obs) * CHUNK)
            self._obs.append(np.zeros((n, *self.obs_shape), dtype=np.uint8))
            self._next.append(np.zeros((n, *self.obs_shape), dtype=np.uint8))
        return c, j

    def add(self, obs, action, reward, next_obs):
        i = self.idx
        c, j = self._slot(i)
        self._obs[c][j] = obs
        self._next[c][j] = next_obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.idx = (i + 1) % self.capacity
        self.full = self.full or self.idx == 0
        self.inserted += 1

    def get(self, idx):
        """Transitions at positions ``idx`` as (obs, action, reward, next_obs) arrays."""
        idx = np.asarray(idx)
        obs = np.stack([self._obs[i // CHUNK][i % CHUNK] for i in idx])
        nxt = np.stack([self._next[i // CHUNK][i % CHUNK] for i in idx])
        return obs, self.actions[idx], self.rewards[idx], nxt

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform with replacement over the filled region."""
        n = len(self)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, n, size=batch_size)

    def sample(self, batch_size: int, seed: int, step: int):
        return self.get(self.sample_indices(batch_size, keyed_rng(0xB0F, seed, step)))
