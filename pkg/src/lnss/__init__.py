"""Long N-step surrogate stage rewards for off-policy actor-critic learning."""

from .baselines import EstimatorKind, make_window, mean_reward, nstep_return, stream_estimator
from .core import (
    SurrogateWindow,
    Transition,
    TransformedTransition,
    discounted_return,
    elevate_reward,
    surrogate_reward_full,
    surrogate_reward_tail,
)
from .harness import ExperimentConfig, derive_seeds, run_evaluation, run_suite, run_training
from .replay import ReplayBuffer
from .td3 import TD3Agent
from .variance import coefficient_of_variation, psi, q_std_percentage, simulate_q_iteration, variance_bound

__version__ = "0.1.0"
