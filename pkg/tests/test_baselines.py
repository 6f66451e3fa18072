import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lnss.baselines import EstimatorKind, mean_reward, nstep_return, stream_estimator
from lnss.core import Transition


def episode_from(rewards):
    return [
        Transition(np.array([float(i)]), np.array([0.0]), r, np.array([i + 1.0]), False)
        for i, r in enumerate(rewards)
    ]


def test_nstep_return():
    assert nstep_return([1, 2, 3], 0.5) == 2.75
    assert nstep_return([4.2], 0.9) == 4.2
    assert nstep_return([0] * 5, 0.7) == 0.0
    with pytest.raises(ValueError):
        nstep_return([], 0.9)


def test_mean_reward():
    assert mean_reward([1, 2, 3]) == 2.0
    assert mean_reward([0.25] * 7) == 0.25
    assert mean_reward([0, 1]) == 0.5
    with pytest.raises(ValueError):
        mean_reward([])


def test_kind_validation():
    with pytest.raises(ValueError):
        EstimatorKind("td-lambda")
    with pytest.raises(ValueError):
        EstimatorKind.nstep(0)
    assert EstimatorKind.lnss(50, 1).label == "N50n1"
    assert EstimatorKind.single_step().label == "Base"


def test_single_step_is_identity():
    ep = episode_from([0.3, 1.0, -2.0])
    out = stream_estimator(EstimatorKind.single_step(), ep, 0.99)
    for t, o in zip(ep, out):
        assert o.surrogate_reward == t.reward
        assert o.bootstrap_state is t.next_state
        assert o.bootstrap_gap == 1


def test_nstep_with_tail():
    out = stream_estimator(EstimatorKind.nstep(2), episode_from([1, 1, 1]), 0.5)
    assert [o.surrogate_reward for o in out] == [1.5, 1.5, 1.0]
    assert [o.bootstrap_gap for o in out] == [2, 2, 1]
    assert [o.bootstrap_state[0] for o in out] == [2.0, 3.0, 3.0]


def test_mean_reward_stream():
    out = stream_estimator(EstimatorKind.mean_reward(3), episode_from([3, 0, 0, 0, 0]), 0.9)
    assert out[0].surrogate_reward == 1.0
    assert all(o.bootstrap_gap == 1 for o in out)
    # tail averages what is left
    assert out[-1].surrogate_reward == 0.0


@given(st.floats(-5, 5), st.integers(1, 8), st.integers(1, 30))
def test_constant_rewards(c, n, T):
    gamma = 0.9
    ep = episode_from([c] * T)
    for kind in (EstimatorKind.single_step(), EstimatorKind.mean_reward(n), EstimatorKind.lnss(n, 1)):
        for o in stream_estimator(kind, ep, gamma):
            assert o.surrogate_reward == pytest.approx(c, rel=1e-12, abs=1e-12)
    full = stream_estimator(EstimatorKind.nstep(n), ep, gamma)[: max(T - n + 1, 0)]
    for o in full:
        assert o.surrogate_reward == pytest.approx(c * (1 - gamma**n) / (1 - gamma), rel=1e-12, abs=1e-12)


@given(st.sampled_from(["single", "nstep", "mean", "lnss"]), st.integers(1, 10), st.integers(0, 40))
def test_one_output_per_step(tag, n, T):
    kind = EstimatorKind(tag, n=n, N=n + 2)
    out = stream_estimator(kind, episode_from(list(range(T))), 0.95)
    assert [o.state[0] for o in out] == [float(i) for i in range(T)]
