# %% [markdown]
# TD3 with single-step rewards versus surrogate rewards
#
# Short pendulum swing-up runs at desk scale.  Each run takes well under a
# minute; pass a larger ``steps`` for closer to the full preset.

# %%
import sys

import numpy as np

from lnss.harness import ExperimentConfig, run_training

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
seeds = range(2)

# %%
results = {}
for estimator in ("single", "lnss", "nstep"):
    finals, qstd = [], []
    for seed in seeds:
        cfg = ExperimentConfig(env="pendulum", estimator=estimator, N=50, n=5 if estimator == "nstep" else 1,
                               seed=seed, max_timesteps=steps)
        res = run_training(cfg)
        finals.append(np.mean([r.mean_return for r in res.records[-3:]]))
        qstd.append(np.mean([r.q_std_pct for r in res.records[-3:]]))
        print(estimator, seed, [round(r.mean_return, 1) for r in res.records])
    results[cfg.kind.label] = (np.mean(finals), np.mean(qstd))

# %% [markdown]
# Final return is the mean of the last three evaluations; q_std_pct is the
# spread of critic values over visited state-action pairs, in percent.

# %%
for label, (ret, q) in results.items():
    print(f"{label:8s} return {ret:7.1f}   q_std_pct {q:6.2f}")
