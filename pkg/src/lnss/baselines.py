"""Comparison return estimators: single-step, uncorrected n-step and mean reward.

Every estimator is exposed as a sliding window with the same push/drain
interface as :class:`lnss.core.SurrogateWindow`, so the training loop does not
care which one it is driving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    SlidingWindow,
    SurrogateWindow,
    Transition,
    TransformedTransition,
    discounted_return,
    transform_episode,
)

KINDS = ("single", "nstep", "mean", "lnss")


@dataclass(frozen=True)
class EstimatorKind:
    """Which reward transform feeds the replay buffer.

    ``tag`` is one of ``single``, ``nstep``, ``mean`` or ``lnss``.  ``n`` is
    the n-step / averaging window for the baselines and the bootstrap horizon
    for LNSS; ``N`` is the LNSS reward window.
    """

    tag: str
    n: int = 1
    N: int = 1

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown estimator kind {self.tag!r}")
        if self.n < 1 or self.N < 1:
            raise ValueError("n and N must be >= 1")

    @classmethod
    def single_step(cls) -> EstimatorKind:
        return cls("single")

    @classmethod
    def nstep(cls, n: int) -> EstimatorKind:
        return cls("nstep", n=n)

    @classmethod
    def mean_reward(cls, n: int) -> EstimatorKind:
        return cls("mean", n=n)

    @classmethod
    def lnss(cls, N: int, n: int = 1) -> EstimatorKind:
        return cls("lnss", n=n, N=N)

    @property
    def label(self) -> str:
        if self.tag == "single":
            return "Base"
        if self.tag == "nstep":
            return f"n{self.n}"
        if self.tag == "mean":
            return f"mean{self.n}"
        return f"N{self.N}n{self.n}"


def nstep_return(rewards: Sequence[float], gamma: float) -> float:
    """Reward part of the n-step target; the agent adds the bootstrap term."""
    return discounted_return(rewards, gamma)


def mean_reward(rewards: Sequence[float]) -> float:
    r = np.asarray(rewards, dtype=np.float64).ravel()
    if r.size == 0:
        raise ValueError("empty window")
    return float(r.sum() / r.size)


class SingleStepWindow(SlidingWindow):
    def __init__(self, gamma: float):
        super().__init__(1, gamma)

    def reward_of(self, rewards, full):
        return rewards[0]

    def bootstrap_index(self, count):
        return 0


class NStepWindow(SlidingWindow):
    """Uncorrected n-step return; the bootstrap is the last state in the window."""

    def reward_of(self, rewards, full):
        return nstep_return(rewards, self.gamma)

    def bootstrap_index(self, count):
        return count - 1


class MeanRewardWindow(SlidingWindow):
    """Mean of the next ``n`` rewards, used with a one-step bootstrap.

    Near the end of an episode the mean is taken over the rewards that remain.
    """

    def reward_of(self, rewards, full):
        return mean_reward(rewards)

    def bootstrap_index(self, count):
        return 0


def make_window(kind: EstimatorKind, gamma: float) -> SlidingWindow:
    if kind.tag == "single":
        return SingleStepWindow(gamma)
    if kind.tag == "nstep":
        return NStepWindow(kind.n, gamma)
    if kind.tag == "mean":
        return MeanRewardWindow(kind.n, gamma)
    if kind.tag == "lnss":
        return SurrogateWindow(kind.N, gamma, kind.n)
    raise ValueError(f"unknown estimator kind {kind!r}")


def stream_estimator(
    kind: EstimatorKind, episode: Sequence[Transition], gamma: float
) -> list[TransformedTransition]:
    """Transform one complete episode with the chosen estimator."""
    return transform_episode(make_window(kind, gamma), episode)
