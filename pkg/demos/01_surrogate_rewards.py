# %% [markdown]
# Surrogate stage rewards
#
# Each stored reward is replaced by a normalised discounted sum of the next N
# rewards.  Replaying that constant value for N steps gives back the same
# discounted N-step return.

# %%
import numpy as np

from lnss import SurrogateWindow, Transition, discounted_return, surrogate_reward_full
from lnss.core import transform_episode

gamma, N = 0.99, 50
rng = np.random.default_rng(0)
rewards = rng.random(N)

r_prime = surrogate_reward_full(rewards, gamma)
replayed = discounted_return(np.full(N, r_prime), gamma)
print(f"surrogate r' = {r_prime:.6f}")
print(f"G of raw rewards = {discounted_return(rewards, gamma):.10f}")
print(f"G of r' repeated = {replayed:.10f}")

# %% [markdown]
# The surrogate is a convex combination of the window, so it stays between the
# smallest and largest reward.  A constant reward maps to itself.

# %%
print(rewards.min() <= r_prime <= rewards.max())
print(surrogate_reward_full([0.3] * N, gamma))

# %% [markdown]
# Streaming an episode: each step enters a window of length N.  A transition
# leaves once the window is full, and whatever is left is drained at the end
# of the episode with a shorter (tail) normalisation.

# %%
episode = [
    Transition(np.array([float(t)]), np.zeros(1), float(t % 3), np.array([t + 1.0]), t == 7)
    for t in range(8)
]
for row in transform_episode(SurrogateWindow(N=4, gamma=0.9), episode):
    print(f"s={row.state[0]:.0f}  r'={row.surrogate_reward:.4f}  "
          f"bootstrap s={row.bootstrap_state[0]:.0f}  gap={row.bootstrap_gap}  terminal={row.bootstrap_terminal}")
