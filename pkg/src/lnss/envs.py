"""Small seeded environments with rewards in [0, 1].

``chain``
    a ring of ``L`` states with IID rewards; nothing the agent does matters,
    which makes it the setting in which the variance analysis holds exactly.
``pointmass``
    a 2-D double integrator that should reach a fixed goal.
``pendulum``
    torque-limited swing-up with the reward peaking when upright.

All actions seen by agents are normalised to ``[-1, 1]``; each environment
maps them to its own physical range.  None of them terminate early unless
asked to, so every episode runs for ``max_steps`` and then truncates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .variance import parse_dist


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    max_steps: int
    reward_range: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class StepResult:
    next_state: np.ndarray
    reward: float
    terminal: bool = False
    truncated: bool = False


# -- pure step functions ------------------------------------------------------


def chain_step(state: int, rng: np.random.Generator, sampler, length: int = 10) -> tuple[int, float]:
    """Advance the ring by one and draw a reward from ``sampler``."""
    return (state + 1) % length, float(sampler(rng, ()))


POINTMASS_DT = 0.05
POINTMASS_GOAL = np.array([0.7, 0.7])
_POINTMASS_SCALE = 2.0 * math.sqrt(2.0)


def pointmass_reward(position) -> float:
    d = float(np.linalg.norm(np.asarray(position, dtype=np.float64) - POINTMASS_GOAL))
    return max(0.0, 1.0 - d / _POINTMASS_SCALE)


def pointmass_step(state, action) -> tuple[np.ndarray, float]:
    """Semi-implicit double integrator on ``[-1, 1]^2`` with clipped velocity."""
    s = np.asarray(state, dtype=np.float64)
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    v = np.clip(s[2:] + a * POINTMASS_DT, -1.0, 1.0)
    p = np.clip(s[:2] + v * POINTMASS_DT, -1.0, 1.0)
    return np.concatenate([p, v]), pointmass_reward(p)


PENDULUM_DT = 0.05
PENDULUM_MAX_SPEED = 8.0
PENDULUM_MAX_TORQUE = 2.0
G, MASS, LENGTH = 10.0, 1.0, 1.0


def pendulum_reward(theta: float) -> float:
    return (math.cos(theta - math.pi) + 1.0) / 2.0


def pendulum_step(theta: float, theta_dot: float, torque: float) -> tuple[float, float, float]:
    """One semi-implicit Euler step; ``theta = 0`` hangs straight down.

    Returns ``(theta, theta_dot, reward)`` with theta wrapped to ``[-pi, pi)``.
    """
    u = min(max(float(torque), -PENDULUM_MAX_TORQUE), PENDULUM_MAX_TORQUE)
    acc = -(G / LENGTH) * math.sin(theta) + u / (MASS * LENGTH**2)
    theta_dot = min(max(theta_dot + acc * PENDULUM_DT, -PENDULUM_MAX_SPEED), PENDULUM_MAX_SPEED)
    theta = theta + theta_dot * PENDULUM_DT
    theta = (theta + math.pi) % (2.0 * math.pi) - math.pi
    return theta, theta_dot, pendulum_reward(theta)


# -- stateful environments ----------------------------------------------------


class Env:
    spec: EnvSpec
    action_bound = 1.0

    def __init__(self, max_steps: int):
        self.max_steps = int(max_steps)
        self._t = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> StepResult:
        raise NotImplementedError

    def _finish(self, obs, reward, terminal=False) -> StepResult:
        self._t += 1
        truncated = (not terminal) and self._t >= self.max_steps
        return StepResult(obs, float(reward), bool(terminal), truncated)


class ChainEnv(Env):
    """Ring of ``length`` states observed as one-hot vectors; the action is ignored."""

    def __init__(self, dist: str = "uniform", length: int = 10, max_steps: int = 200):
        super().__init__(max_steps)
        self.dist = dist
        self.length = int(length)
        self._sampler, self.reward_variance = parse_dist(dist)
        self.spec = EnvSpec("chain", self.length, 1, self.max_steps, _dist_range(dist))
        self._rng = np.random.default_rng(0)
        self.index = 0

    def _obs(self):
        obs = np.zeros(self.length)
        obs[self.index] = 1.0
        return obs

    def reset(self, seed=None):
        self._rng = np.random.default_rng(seed)
        self.index = 0
        self._t = 0
        return self._obs()

    def step(self, action):
        self.index, reward = chain_step(self.index, self._rng, self._sampler, self.length)
        return self._finish(self._obs(), reward)


def _dist_range(dist: str) -> tuple[float, float]:
    kind, _, arg = dist.partition(":")
    if kind == "const":
        c = float(arg)
        return (min(0.0, c), max(0.0, c))
    return (0.0, 1.0)


class PointMassEnv(Env):
    def __init__(self, max_steps: int = 200, early_termination: bool = False):
        super().__init__(max_steps)
        self.early_termination = early_termination
        self.spec = EnvSpec("pointmass", 4, 2, self.max_steps)
        self.state = np.zeros(4)

    def reset(self, seed=None):
        rng = np.random.default_rng(seed)
        self.state = np.concatenate([rng.uniform(-1.0, 1.0, 2), np.zeros(2)])
        self._t = 0
        return self.state.copy()

    def step(self, action):
        self.state, reward = pointmass_step(self.state, action)
        done = self.early_termination and np.linalg.norm(self.state[:2] - POINTMASS_GOAL) < 0.05
        return self._finish(self.state.copy(), reward, done)


class PendulumEnv(Env):
    """Swing-up; observation ``(cos theta, sin theta, theta_dot)``."""

    def __init__(self, max_steps: int = 200):
        super().__init__(max_steps)
        self.spec = EnvSpec("pendulum", 3, 1, self.max_steps)
        self.theta = 0.0
        self.theta_dot = 0.0

    def _obs(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])

    def reset(self, seed=None):
        rng = np.random.default_rng(seed)
        self.theta = float(rng.uniform(-math.pi, math.pi))
        self.theta_dot = 0.0
        self._t = 0
        return self._obs()

    def set_state(self, theta: float, theta_dot: float = 0.0) -> np.ndarray:
        self.theta, self.theta_dot = float(theta), float(theta_dot)
        return self._obs()

    def step(self, action):
        u = float(np.clip(np.asarray(action, dtype=np.float64).ravel()[0], -1.0, 1.0)) * PENDULUM_MAX_TORQUE
        self.theta, self.theta_dot, reward = pendulum_step(self.theta, self.theta_dot, u)
        return self._finish(self._obs(), reward)


ENV_NAMES = ("chain", "pointmass", "pendulum")


def make_env(name: str, *, dist: str = "uniform", max_steps: int | None = None,
             early_termination: bool = False) -> Env:
    name = name.lower()
    kw = {} if max_steps is None else {"max_steps": max_steps}
    if name == "chain":
        return ChainEnv(dist=dist, **kw)
    if name == "pointmass":
        return PointMassEnv(early_termination=early_termination, **kw)
    if name == "pendulum":
        return PendulumEnv(**kw)
    raise ValueError(f"unknown environment {name!r}")


def env_reset(env: Env, seed: int) -> np.ndarray:
    return env.reset(seed)
