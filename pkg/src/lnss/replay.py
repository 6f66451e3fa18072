"""Ring replay buffer of transformed transitions."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import TransformedTransition


@dataclass
class TrainBatch:
    state: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    bootstrap_state: np.ndarray
    bootstrap_terminal: np.ndarray
    bootstrap_gap: np.ndarray

    def __len__(self):
        return len(self.reward)


class ReplayBuffer:
    """Fixed-capacity FIFO store with uniform sampling.

    Appends and samples take the same lock, so any number of producer threads
    may append while one learner samples; a sample never sees a half-written
    row.  Storage is allocated on the first append, when the state and action
    sizes become known.
    """

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.size = 0
        self.cursor = 0
        self._lock = threading.Lock()
        self._state = None

    def __len__(self):
        return self.size

    def _allocate(self, t: TransformedTransition):
        sd = np.asarray(t.state).size
        ad = np.asarray(t.action).size
        cap = self.capacity
        self._state = np.zeros((cap, sd))
        self._action = np.zeros((cap, ad))
        self._reward = np.zeros(cap)
        self._boot = np.zeros((cap, sd))
        self._terminal = np.zeros(cap, dtype=bool)
        self._gap = np.zeros(cap, dtype=np.int64)

    def append(self, t: TransformedTransition) -> None:
        with self._lock:
            if self._state is None:
                self._allocate(t)
            i = self.cursor
            self._state[i] = t.state
            self._action[i] = t.action
            self._reward[i] = t.surrogate_reward
            self._boot[i] = t.bootstrap_state
            self._terminal[i] = t.bootstrap_terminal
            self._gap[i] = t.bootstrap_gap
            self.cursor = (i + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def extend(self, transitions) -> None:
        for t in transitions:
            self.append(t)

    def _rows(self, idx) -> TrainBatch:
        return TrainBatch(
            self._state[idx],
            self._action[idx],
            self._reward[idx],
            self._boot[idx],
            self._terminal[idx],
            self._gap[idx],
        )

    def sample(self, k: int, rng: np.random.Generator) -> TrainBatch:
        """Draw ``k`` rows uniformly with replacement."""
        with self._lock:
            if self.size < k or self.size == 0:
                raise ValueError(f"buffer underfilled: {self.size} stored, {k} requested")
            idx = rng.integers(0, self.size, size=k)
            return self._rows(idx)

    def snapshot(self) -> TrainBatch:
        """All stored rows, oldest first."""
        with self._lock:
            if self.size < self.capacity:
                idx = np.arange(self.size)
            else:
                idx = (np.arange(self.capacity) + self.cursor) % self.capacity
            if self._state is None:
                raise ValueError("buffer is empty")
            return self._rows(idx)

    def dump(self, path) -> None:
        b = self.snapshot()
        np.savez(
            path,
            state=b.state,
            action=b.action,
            reward=b.reward,
            bootstrap_state=b.bootstrap_state,
            bootstrap_terminal=b.bootstrap_terminal,
            bootstrap_gap=b.bootstrap_gap,
        )


def buffer_append(buf: ReplayBuffer, t: TransformedTransition) -> None:
    buf.append(t)


def buffer_sample(buf: ReplayBuffer, k: int, rng: np.random.Generator) -> TrainBatch:
    return buf.sample(k, rng)
