import numpy as np
import pytest

from lnss.baselines import EstimatorKind, stream_estimator
from lnss.core import Transition, TransformedTransition
from lnss.envs import ChainEnv
from lnss.replay import ReplayBuffer, TrainBatch
from lnss.td3 import TD3Agent, tabular_q_iteration


def make_batch(k=8, sd=3, ad=1, gap=1, terminal=False, seed=0):
    rng = np.random.default_rng(seed)
    return TrainBatch(
        rng.normal(size=(k, sd)),
        rng.uniform(-1, 1, (k, ad)),
        rng.normal(size=k),
        rng.normal(size=(k, sd)),
        np.full(k, terminal),
        np.full(k, gap, dtype=np.int64),
    )


def constant_critic(net, value):
    net.flat[:] = 0.0
    net.params[-1][...] = value


def test_terminal_target_is_reward():
    agent = TD3Agent(3, 1, width=16, seed=0)
    b = make_batch(terminal=True)
    np.testing.assert_array_equal(agent.compute_target(b), b.reward)


def test_zero_critics_target_is_reward():
    agent = TD3Agent(3, 1, width=16, seed=0)
    constant_critic(agent.critic1_target, 0.0)
    constant_critic(agent.critic2_target, 0.0)
    b = make_batch()
    np.testing.assert_array_equal(agent.compute_target(b), b.reward)


def test_bootstrap_gap_discount():
    agent = TD3Agent(3, 1, width=16, seed=0, gamma=0.99)
    constant_critic(agent.critic1_target, 1.0)
    constant_critic(agent.critic2_target, 2.0)
    b = make_batch(gap=5)
    np.testing.assert_allclose(agent.compute_target(b) - b.reward, 0.9509900499, rtol=1e-12)


def test_target_uses_smaller_critic():
    agent = TD3Agent(3, 1, width=16, seed=0, gamma=0.9)
    agent.critic2_target.flat[:] = agent.critic1_target.flat * -3.0
    b = make_batch(k=64)
    # replay the smoothing noise so both target critics can be recomputed by hand
    agent.noise_rng = np.random.default_rng(123)
    noise_rng = np.random.default_rng(123)
    y = agent.compute_target(b)
    a = agent.actor_target.forward(b.bootstrap_state, cache=False)
    a = np.clip(a + np.clip(noise_rng.normal(0, 0.2, a.shape), -0.5, 0.5), -1, 1)
    x = np.concatenate([b.bootstrap_state, a], axis=1)
    q1 = agent.critic1_target.forward(x, cache=False)[:, 0]
    q2 = agent.critic2_target.forward(x, cache=False)[:, 0]
    boot = (y - b.reward) / 0.9
    assert np.all(boot <= q1 + 1e-12) and np.all(boot <= q2 + 1e-12)
    np.testing.assert_allclose(boot, np.minimum(q1, q2), rtol=1e-12, atol=1e-15)


def test_critic_at_target_is_unchanged():
    agent = TD3Agent(3, 1, width=16, seed=0)
    constant_critic(agent.critic1, 0.7)
    constant_critic(agent.critic2, 0.7)
    before = agent.critic1.flat.copy(), agent.critic2.flat.copy()
    loss = agent.critic_update(make_batch(), target=np.full(8, 0.7))
    assert loss == 0.0
    np.testing.assert_array_equal(agent.critic1.flat, before[0])
    np.testing.assert_array_equal(agent.critic2.flat, before[1])


def test_critic_loss_decreases_on_frozen_batch():
    agent = TD3Agent(3, 1, width=32, seed=1)
    b = make_batch(k=32, seed=4)
    y = agent.compute_target(b)
    losses = [agent.critic_update(b, target=y) for _ in range(100)]
    assert losses[-1] < 0.75 * losses[0]
    assert np.mean(np.diff(losses) < 0) > 0.9


def test_critics_share_targets():
    agent = TD3Agent(3, 1, width=16, seed=0)
    agent.critic2.flat[:] = agent.critic1.flat
    agent.critic_update(make_batch())
    np.testing.assert_array_equal(agent.critic1.flat, agent.critic2.flat)


def test_policy_delay():
    agent = TD3Agent(3, 1, width=16, seed=0, policy_delay=2)
    buf = ReplayBuffer(100)
    b = make_batch(k=20)
    for i in range(20):
        buf.append(TransformedTransition(b.state[i], b.action[i], b.reward[i], b.bootstrap_state[i], False, 1))
    rng = np.random.default_rng(0)
    for _ in range(10):
        agent.train_step(buf, 8, rng)
    assert agent.critic_updates == 10 and agent.actor_updates == 5


def test_actor_follows_critic():
    # Q = a_0 + 2 for a in [-1, 1]: the policy should push a_0 upward
    agent = TD3Agent(2, 2, width=8, seed=0, tau=0.0)
    c = agent.critic1
    c.flat[:] = 0.0
    W0, b0, W1, b1, W2, b2 = c.params
    W0[2, 0] = 1.0  # input layout is (s_0, s_1, a_0, a_1)
    b0[0] = 2.0
    W1[0, 0] = 1.0
    W2[0, 0] = 1.0
    targets_before = {k: v.flat.copy() for k, v in agent.networks().items() if k.endswith("target")}
    b = make_batch(k=16, sd=2, ad=2)
    a0 = []
    for _ in range(20):
        agent.actor_update(b)
        a0.append(agent.actor.forward(b.state, cache=False)[:, 0].mean())
    assert all(x < y for x, y in zip(a0, a0[1:]))
    for k, v in targets_before.items():
        np.testing.assert_array_equal(agent.networks()[k].flat, v)


def test_select_action():
    agent = TD3Agent(3, 2, width=16, seed=0)
    s = np.array([0.1, -0.2, 0.3])
    np.testing.assert_array_equal(agent.select_action(s), agent.select_action(s))
    a1 = agent.select_action(s, True, np.random.default_rng(5))
    a2 = agent.select_action(s, True, np.random.default_rng(5))
    np.testing.assert_array_equal(a1, a2)
    agent.expl_noise = 50.0
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert np.all(np.abs(agent.select_action(s, True, rng)) <= 1.0)


@pytest.mark.parametrize("kind", [EstimatorKind.single_step(), EstimatorKind.lnss(20, 1)])
def test_tabular_fixed_point(kind):
    env = ChainEnv("const:1.0", max_steps=200)
    obs = env.reset(0)
    episode = []
    for _ in range(200):
        res = env.step(None)
        episode.append(Transition(obs, np.zeros(1), res.reward, res.next_state, res.terminal))
        obs = res.next_state
    rows = stream_estimator(kind, episode, 0.9)
    q = tabular_q_iteration(
        [r.state.argmax() for r in rows],
        [r.surrogate_reward for r in rows],
        [r.bootstrap_state.argmax() for r in rows],
        [r.bootstrap_gap for r in rows],
        [r.bootstrap_terminal for r in rows],
        10,
        0.9,
    )
    np.testing.assert_allclose(q, 10.0, atol=1e-6)
