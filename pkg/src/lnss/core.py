"""Surrogate stage reward computation and the streaming window that applies it.

The window holds the most recent ``N`` raw transitions of an episode.  Each
time it fills, the oldest transition is emitted with its reward replaced by
the normalised discounted sum of the ``N`` rewards in the window.  At episode
end the remaining transitions are emitted using however many rewards are left.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool = False


@dataclass(frozen=True)
class TransformedTransition:
    """A transition as stored in the replay buffer.

    ``bootstrap_state`` is the state the critic target bootstraps from and
    ``bootstrap_gap`` the number of environment steps separating it from
    ``state``; the target discounts the bootstrap by ``gamma ** bootstrap_gap``.
    """

    state: np.ndarray
    action: np.ndarray
    surrogate_reward: float
    bootstrap_state: np.ndarray
    bootstrap_terminal: bool
    bootstrap_gap: int


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"invalid discount: gamma={gamma!r} must lie in (0, 1)")


def _as_rewards(rewards: Sequence[float], what: str = "empty window") -> np.ndarray:
    r = np.asarray(rewards, dtype=np.float64).ravel()
    if r.size == 0:
        raise ValueError(what)
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    return r


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of ``gamma**t * rewards[t]`` over the window."""
    _check_gamma(gamma)
    r = _as_rewards(rewards)
    total = 0.0
    discount = 1.0
    for x in r:
        total += discount * float(x)
        discount *= gamma
    return total


def _normaliser(gamma: float, length: int) -> float:
    # (gamma - 1) / (gamma**L - 1): positive, equals 1 for L == 1
    return (gamma - 1.0) / (gamma**length - 1.0)


def surrogate_reward_full(rewards: Sequence[float], gamma: float, N: int | None = None) -> float:
    """Surrogate reward from a complete window of ``N`` rewards.

    The result ``r'`` is the constant per-step reward whose ``N``-step
    discounted sum equals the discounted sum of ``rewards``.
    """
    _check_gamma(gamma)
    r = _as_rewards(rewards)
    if N is not None and r.size != N:
        raise ValueError(f"expected a window of {N} rewards, got {r.size}")
    return discounted_return(r, gamma) * _normaliser(gamma, r.size)


def surrogate_reward_tail(rewards: Sequence[float], gamma: float, N: int | None = None) -> float:
    """Surrogate reward from the ``M < N`` rewards left at the end of an episode."""
    _check_gamma(gamma)
    r = _as_rewards(rewards, "empty tail")
    if N is not None and r.size >= N:
        raise ValueError(f"tail must be shorter than N={N}, got {r.size} rewards")
    return discounted_return(r, gamma) * _normaliser(gamma, r.size)


def elevate_reward(r: float, shift: float = 0.0) -> float:
    """Shift a reward up by ``shift`` and clamp it at zero."""
    if shift < 0:
        raise ValueError("reward shift must be non-negative")
    if shift == 0:
        return float(r)
    return max(0.0, float(r) + shift)


class SlidingWindow:
    """Per-episode FIFO of raw transitions feeding the replay buffer.

    Subclasses choose the window length, how the emitted reward is formed
    from the rewards currently held, and which entry supplies the bootstrap
    state.  One instance belongs to one actor and is not thread-safe.
    """

    def __init__(self, capacity: int, gamma: float):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        _check_gamma(gamma)
        self.capacity = int(capacity)
        self.gamma = float(gamma)
        self._entries: deque[Transition] = deque()

    def __len__(self) -> int:
        return len(self._entries)

    def reward_of(self, rewards: list[float], full: bool) -> float:
        raise NotImplementedError

    def bootstrap_index(self, count: int) -> int:
        raise NotImplementedError

    def _emit(self, full: bool) -> TransformedTransition:
        entries = self._entries
        count = len(entries)
        idx = self.bootstrap_index(count)
        boot = entries[idx]
        reward = self.reward_of([e.reward for e in entries], full)
        head = entries.popleft()
        return TransformedTransition(
            state=head.state,
            action=head.action,
            surrogate_reward=reward,
            bootstrap_state=boot.next_state,
            bootstrap_terminal=bool(boot.terminal),
            bootstrap_gap=idx + 1,
        )

    def push(self, t: Transition) -> TransformedTransition | None:
        self._entries.append(t)
        if len(self._entries) >= self.capacity:
            return self._emit(full=True)
        return None

    def drain(self) -> list[TransformedTransition]:
        out = []
        while self._entries:
            out.append(self._emit(full=False))
        return out

    def clear(self) -> None:
        self._entries.clear()


class SurrogateWindow(SlidingWindow):
    """The temporary buffer that turns raw rewards into surrogate rewards.

    ``N`` is the number of rewards folded into each surrogate reward, ``n``
    the bootstrap horizon of the critic update (usually 1).
    """

    def __init__(self, N: int, gamma: float, n: int = 1):
        if n < 1:
            raise ValueError("n must be >= 1")
        super().__init__(N, gamma)
        self.n = int(n)

    @property
    def N(self) -> int:
        return self.capacity

    def reward_of(self, rewards, full):
        if full:
            return surrogate_reward_full(rewards, self.gamma, self.capacity)
        return surrogate_reward_tail(rewards, self.gamma)

    def bootstrap_index(self, count):
        return min(self.n - 1, count - 1)


def window_push(window: SlidingWindow, t: Transition) -> TransformedTransition | None:
    return window.push(t)


def window_drain(window: SlidingWindow) -> list[TransformedTransition]:
    return window.drain()


def transform_episode(
    window: SlidingWindow,
    episode: Sequence[Transition],
    reward_fn: Callable[[float], float] | None = None,
) -> list[TransformedTransition]:
    """Stream a complete episode through ``window`` and drain it."""
    if len(window):
        raise ValueError("window must be empty at the start of an episode")
    out: list[TransformedTransition] = []
    for t in episode:
        if reward_fn is not None:
            t = Transition(t.state, t.action, reward_fn(t.reward), t.next_state, t.terminal)
        emitted = window.push(t)
        if emitted is not None:
            out.append(emitted)
    out.extend(window.drain())
    return out
