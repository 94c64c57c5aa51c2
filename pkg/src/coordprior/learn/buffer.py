from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Episode:
    """One stored episode.

    ``obs`` and ``state`` carry T+1 entries (the final observation/state is
    needed for the last bootstrap target); ``actions``, ``reward`` and
    ``terminated`` carry T. ``adjacency`` is the episode's fixed prior, or
    None for methods without a graph.
    """

    obs: np.ndarray          # (T+1, n, obs_dim)
    actions: np.ndarray      # (T, n) int
    reward: np.ndarray       # (T,)
    terminated: np.ndarray   # (T,) bool, absorbing end (not time-limit truncation)
    state: np.ndarray        # (T+1, state_dim)
    adjacency: np.ndarray | None = None
    episode_id: int = 0
    fallback: bool = False

    @property
    def length(self) -> int:
        return len(self.reward)


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    reward: np.ndarray
    terminated: np.ndarray
    next_obs: np.ndarray
    state: np.ndarray
    next_state: np.ndarray
    adjacency: np.ndarray | None

    def __len__(self) -> int:
        return len(self.reward)


def flatten(episodes: list[Episode]) -> Batch:
    """Stack every transition of ``episodes`` into one flat batch."""
    obs = np.concatenate([e.obs[:-1] for e in episodes])
    nobs = np.concatenate([e.obs[1:] for e in episodes])
    state = np.concatenate([e.state[:-1] for e in episodes])
    nstate = np.concatenate([e.state[1:] for e in episodes])
    adj = None
    if episodes[0].adjacency is not None:
        adj = np.concatenate([np.broadcast_to(e.adjacency, (e.length,) + e.adjacency.shape)
                              for e in episodes])
    return Batch(obs, np.concatenate([e.actions for e in episodes]),
                 np.concatenate([e.reward for e in episodes]),
                 np.concatenate([e.terminated for e in episodes]),
                 nobs, state, nstate, adj)


class ReplayBuffer:
    """Ring buffer of whole episodes; capacity counts episodes."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Episode] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, episode: Episode) -> None:
        if len(self._items) < self.capacity:
            self._items.append(episode)
        else:
            self._items[self._next] = episode
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Episode]:
        if batch_size > len(self._items):
            raise ValueError(f"buffer holds {len(self._items)} episodes, asked for {batch_size}")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def __iter__(self):
        return iter(self._items)
