"""TD3 learner whose reward term and bootstrap distance come from the replay rows.

The critic target for a stored row is

    y = reward + (1 - bootstrap_terminal) * gamma**bootstrap_gap * min_j Q'_j(s_b, a_b)

with ``a_b`` the target policy action at the bootstrap state plus clipped
Gaussian smoothing noise.  A single-step buffer therefore gives plain TD3, an
n-step buffer the uncorrected n-step update, and an LNSS buffer the surrogate
reward update, without the agent knowing which one it is training on.
"""

from __future__ import annotations

import threading

import numpy as np

from .neural import Adam, DivergenceError, MLP, make_actor, make_critic, soft_update
from .replay import ReplayBuffer, TrainBatch


class TD3Agent:
    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        *,
        width: int = 64,
        action_bound: float = 1.0,
        gamma: float = 0.99,
        tau: float = 0.005,
        policy_noise: float = 0.2,
        noise_clip: float = 0.5,
        policy_delay: int = 2,
        expl_noise: float = 0.1,
        lr: float = 1e-3,
        seed: int = 0,
    ):
        if not 0.0 < gamma < 1.0:
            raise ValueError("invalid discount")
        if policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        self.state_dim, self.action_dim = int(state_dim), int(action_dim)
        self.action_bound = float(action_bound)
        self.gamma, self.tau = float(gamma), float(tau)
        self.policy_noise, self.noise_clip = policy_noise, noise_clip
        self.policy_delay = int(policy_delay)
        self.expl_noise = expl_noise

        init_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
        init_rng = np.random.default_rng(init_seq)
        self.noise_rng = np.random.default_rng(noise_seq)

        self.actor = make_actor(state_dim, action_dim, width, init_rng, self.action_bound)
        self.critic1 = make_critic(state_dim, action_dim, width, init_rng)
        self.critic2 = make_critic(state_dim, action_dim, width, init_rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = Adam(self.actor.flat.size, lr)
        self.critic1_opt = Adam(self.critic1.flat.size, lr)
        self.critic2_opt = Adam(self.critic2.flat.size, lr)

        self.critic_updates = 0
        self.actor_updates = 0
        # held while parameters change, so actor workers copy consistent snapshots
        self.lock = threading.RLock()

    # -- acting ---------------------------------------------------------------

    def policy(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=np.float64).reshape(1, -1)
        return self.actor.forward(s, cache=False)[0]

    def select_action(self, state, explore: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        a = self.policy(state)
        if explore:
            if rng is None:
                raise ValueError("exploration needs a random generator")
            a = a + rng.normal(0.0, self.expl_noise * self.action_bound, size=self.action_dim)
            a = np.clip(a, -self.action_bound, self.action_bound)
        return a

    def actor_snapshot(self) -> MLP:
        with self.lock:
            return self.actor.copy()

    def q_values(self, states, actions) -> np.ndarray:
        x = np.concatenate([np.asarray(states, dtype=np.float64), np.asarray(actions, dtype=np.float64)], axis=1)
        return self.critic1.forward(x, cache=False)[:, 0]

    # -- learning -------------------------------------------------------------

    def compute_target(self, batch: TrainBatch) -> np.ndarray:
        b = self.action_bound
        a_next = self.actor_target.forward(batch.bootstrap_state, cache=False)
        noise = self.noise_rng.normal(0.0, self.policy_noise * b, size=a_next.shape)
        np.clip(noise, -self.noise_clip * b, self.noise_clip * b, out=noise)
        a_next = np.clip(a_next + noise, -b, b)
        x = np.concatenate([batch.bootstrap_state, a_next], axis=1)
        q1 = self.critic1_target.forward(x, cache=False)[:, 0]
        q2 = self.critic2_target.forward(x, cache=False)[:, 0]
        discount = np.power(self.gamma, batch.bootstrap_gap)
        discount[batch.bootstrap_terminal] = 0.0
        return batch.reward + discount * np.minimum(q1, q2)

    def critic_update(self, batch: TrainBatch, target: np.ndarray | None = None) -> float:
        """One Adam step on both critics toward shared targets; returns the mean loss."""
        y = self.compute_target(batch) if target is None else target
        x = np.concatenate([batch.state, batch.action], axis=1)
        k = len(y)
        losses = []
        with self.lock:
            for critic, opt in ((self.critic1, self.critic1_opt), (self.critic2, self.critic2_opt)):
                diff = critic.forward(x)[:, 0] - y
                loss = float(np.dot(diff, diff) / k)
                if not np.isfinite(loss):
                    raise DivergenceError("divergence detected: non-finite critic loss")
                critic.backward((2.0 / k) * diff[:, None])
                opt.step(critic.flat, critic.grad_flat)
                losses.append(loss)
        self.critic_updates += 1
        return 0.5 * (losses[0] + losses[1])

    def actor_update(self, batch: TrainBatch) -> float:
        """Ascend mean Q1(s, pi(s)), then move all three targets toward the online nets."""
        k = len(batch)
        with self.lock:
            a = self.actor.forward(batch.state)
            q = self.critic1.forward(np.concatenate([batch.state, a], axis=1))[:, 0]
            _, dx = self.critic1.backward(np.full((k, 1), -1.0 / k))
            self.actor.backward(dx[:, self.state_dim :])
            self.actor_opt.step(self.actor.flat, self.actor.grad_flat)
            soft_update(self.critic1_target, self.critic1, self.tau)
            soft_update(self.critic2_target, self.critic2, self.tau)
            soft_update(self.actor_target, self.actor, self.tau)
        self.actor_updates += 1
        return float(q.mean())

    def train_step(self, buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> float:
        """Sample a batch, update the critics, and the actor every ``policy_delay`` calls."""
        batch = buffer.sample(batch_size, rng)
        loss = self.critic_update(batch)
        if self.critic_updates % self.policy_delay == 0:
            self.actor_update(batch)
        return loss

    def networks(self) -> dict[str, MLP]:
        return {
            "actor": self.actor,
            "actor_target": self.actor_target,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "critic1_target": self.critic1_target,
            "critic2_target": self.critic2_target,
        }

    def load_networks(self, nets: dict[str, MLP]) -> None:
        for name, net in self.networks().items():
            if name in nets:
                net.load_flat(nets[name].flat)


def tabular_q_iteration(
    state_index,
    reward,
    next_index,
    gap,
    terminal,
    n_states: int,
    gamma: float,
    tol: float = 1e-12,
    max_iterations: int = 100_000,
) -> np.ndarray:
    """Synchronous Q-iteration on a lookup table in place of the critic networks.

    Every stored row backs up ``reward + gamma**gap * Q[next]`` (no bootstrap
    when terminal); each state's new value is the mean over its rows.
    Iterates until the largest change falls below ``tol``.
    """
    s = np.asarray(state_index, dtype=np.int64)
    r = np.asarray(reward, dtype=np.float64)
    nxt = np.asarray(next_index, dtype=np.int64)
    disc = np.power(gamma, np.asarray(gap, dtype=np.float64))
    disc[np.asarray(terminal, dtype=bool)] = 0.0
    counts = np.bincount(s, minlength=n_states).astype(np.float64)
    visited = counts > 0
    q = np.zeros(n_states)
    for _ in range(max_iterations):
        targets = r + disc * q[nxt]
        new = np.zeros(n_states)
        new[visited] = np.bincount(s, weights=targets, minlength=n_states)[visited] / counts[visited]
        delta = np.max(np.abs(new - q))
        q = new
        if delta < tol:
            break
    return q
