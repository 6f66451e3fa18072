"""Experiment configuration, training and evaluation loops, and multi-seed suites."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import EstimatorKind, make_window
from .core import Transition, elevate_reward
from .envs import ENV_NAMES, Env, make_env
from .neural import DivergenceError, load_checkpoint, save_checkpoint
from .replay import ReplayBuffer
from .td3 import TD3Agent
from .variance import coefficient_of_variation, q_std_percentage

log = logging.getLogger(__name__)

METRICS_HEADER = ("step", "mean_return", "std_return", "q_mean", "q_std_pct", "critic_loss")
EVAL_SEED_OFFSET = 100


@dataclass
class ExperimentConfig:
    """Every knob of a run.  Defaults are the desk-scale preset."""

    env: str = "pointmass"
    dist: str = "uniform"
    episode_steps: int = 200
    early_termination: bool = False
    estimator: str = "lnss"
    N: int = 50
    n: int = 1
    seed: int = 0
    max_timesteps: int = 50_000
    eval_freq: int = 1_000
    eval_episodes: int = 5
    start_timesteps: int = 1_000
    batch_size: int = 64
    buffer_size: int = 100_000
    gamma: float = 0.99
    tau: float = 0.005
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    expl_noise: float = 0.1
    lr: float = 1e-3
    workers: int = 1
    reward_shift: float = 0.0
    width: int = 64

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.env not in ENV_NAMES:
            raise ValueError(f"unknown env {self.env!r}")
        self.kind  # validates estimator/N/n
        positive = ("episode_steps", "N", "n", "max_timesteps", "eval_freq", "eval_episodes",
                    "batch_size", "buffer_size", "policy_delay", "workers", "width")
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.start_timesteps < 0:
            raise ValueError("start_timesteps must be >= 0")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("invalid discount: gamma must lie in (0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        for name in ("policy_noise", "noise_clip", "expl_noise", "reward_shift"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @property
    def kind(self) -> EstimatorKind:
        return EstimatorKind(self.estimator, n=self.n, N=self.N)

    @classmethod
    def desk(cls, **overrides) -> ExperimentConfig:
        return cls(**overrides)

    @classmethod
    def paper(cls, **overrides) -> ExperimentConfig:
        values = dict(
            episode_steps=1000, max_timesteps=800_000, eval_freq=10_000, start_timesteps=8_000,
            batch_size=256, buffer_size=1_000_000, workers=8, width=256,
        )
        values.update(overrides)
        return cls(**values)

    # -- key=value serialisation ---------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={repr(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = dataclasses.asdict(base) if base is not None else {}
        for key, raw in mapping.items():
            if key == "preset":
                continue
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _coerce(types[key], raw)
        return cls(**values)

    @classmethod
    def from_text(cls, text: str) -> ExperimentConfig:
        mapping = parse_key_values(text)
        base = cls.paper() if mapping.get("preset", "desk") == "paper" else None
        return cls.from_mapping(mapping, base)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        return cls.from_text(Path(path).read_text())


def _coerce(type_name, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if type_name in ("int", int):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if type_name in ("float", float):
        return float(raw)
    if type_name in ("bool", bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def derive_seeds(mother: int, workers: int) -> tuple[list[int], int]:
    """Worker ``i`` is seeded with ``mother + i``; evaluation uses ``mother + 100``."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return [mother + i for i in range(workers)], mother + EVAL_SEED_OFFSET


@dataclass
class EvalRecord:
    step: int
    mean_return: float
    std_return: float
    q_mean: float
    q_std_pct: float
    critic_loss: float = math.nan

    def row(self):
        return [self.step, self.mean_return, self.std_return, self.q_mean, self.q_std_pct, self.critic_loss]


@dataclass
class TrainingResult:
    config: ExperimentConfig
    records: list[EvalRecord]
    agent: TD3Agent
    buffer: ReplayBuffer
    metrics_path: Path | None = None
    checkpoint_path: Path | None = None


def build_env(config: ExperimentConfig) -> Env:
    return make_env(config.env, dist=config.dist, max_steps=config.episode_steps,
                    early_termination=config.early_termination)


def build_agent(config: ExperimentConfig, env: Env) -> TD3Agent:
    return TD3Agent(
        env.spec.state_dim,
        env.spec.action_dim,
        width=config.width,
        action_bound=env.action_bound,
        gamma=config.gamma,
        tau=config.tau,
        policy_noise=config.policy_noise,
        noise_clip=config.noise_clip,
        policy_delay=config.policy_delay,
        expl_noise=config.expl_noise,
        lr=config.lr,
        seed=config.seed,
    )


def run_evaluation(agent: TD3Agent, env: Env, eval_seed: int, episodes: int = 5, step: int = 0) -> EvalRecord:
    """Roll out the deterministic policy; returns use the environment's own rewards.

    Q statistics are taken over critic-1 values of every state-action pair
    visited in the evaluation episodes.  Uses its own environment and seeds,
    so training state is untouched.
    """
    if env.spec.state_dim != agent.state_dim or env.spec.action_dim != agent.action_dim:
        raise ValueError(
            f"agent expects state/action dims {agent.state_dim}/{agent.action_dim}, "
            f"env {env.spec.name} has {env.spec.state_dim}/{env.spec.action_dim}"
        )
    returns, states, actions = [], [], []
    for ep in range(episodes):
        state = env.reset([eval_seed, ep])
        rewards = []
        while True:
            action = agent.select_action(state)
            states.append(state)
            actions.append(action)
            res = env.step(action)
            rewards.append(res.reward)
            state = res.next_state
            if res.terminal or res.truncated:
                break
        returns.append(math.fsum(rewards))
    q = agent.q_values(np.array(states), np.array(actions))
    try:
        q_pct = q_std_percentage(q)
    except ValueError:
        q_pct = math.nan
    r = np.array(returns)
    return EvalRecord(step, float(r.mean()), float(r.std()), float(q.mean()), q_pct)


class _MetricsWriter:
    def __init__(self, path: Path | None):
        self.path = path
        self._fh = None
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(path, "w", newline="")
            self._writer = csv.writer(self._fh)
            self._writer.writerow(METRICS_HEADER)
            self._fh.flush()

    def write(self, rec: EvalRecord):
        if self._fh is not None:
            self._writer.writerow(rec.row())
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()


class _Learner:
    """Shared by both execution modes: trains once per environment step and evaluates on cadence."""

    def __init__(self, config: ExperimentConfig, agent: TD3Agent, buffer: ReplayBuffer,
                 sample_rng, eval_env: Env, eval_seed: int, writer: _MetricsWriter):
        self.config, self.agent, self.buffer = config, agent, buffer
        self.sample_rng = sample_rng
        self.eval_env, self.eval_seed = eval_env, eval_seed
        self.writer = writer
        self.records: list[EvalRecord] = []
        self._losses: list[float] = []

    def after_env_step(self, t: int) -> None:
        cfg = self.config
        if len(self.buffer) >= cfg.batch_size:
            self._losses.append(self.agent.train_step(self.buffer, cfg.batch_size, self.sample_rng))
        if (t + 1) % cfg.eval_freq == 0:
            rec = run_evaluation(self.agent, self.eval_env, self.eval_seed, cfg.eval_episodes, step=t + 1)
            rec.critic_loss = float(np.mean(self._losses)) if self._losses else math.nan
            self._losses.clear()
            self.records.append(rec)
            self.writer.write(rec)
            log.info("step %d: return %.3f (std %.3f), std(Q)/Q %.2f%%",
                     rec.step, rec.mean_return, rec.std_return, rec.q_std_pct)


class _Actor:
    """One environment, its transformation window, and its exploration stream."""

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = seed
        self.env = build_env(config)
        self.window = make_window(config.kind, config.gamma)
        self.rng = np.random.default_rng(seed)
        self.episode = 0
        self.state = self.env.reset([seed, self.episode])

    def act(self, policy, t: int) -> np.ndarray:
        if t < self.config.start_timesteps:
            return self.rng.uniform(-self.env.action_bound, self.env.action_bound, self.env.spec.action_dim)
        return policy(self.state)

    def step(self, action, buffer: ReplayBuffer) -> bool:
        """Advance one step and store whatever the window emits; returns True at episode end."""
        cfg = self.config
        res = self.env.step(action)
        reward = elevate_reward(res.reward, cfg.reward_shift)
        out = self.window.push(Transition(self.state, action, reward, res.next_state, res.terminal))
        if out is not None:
            buffer.append(out)
        self.state = res.next_state
        if res.terminal or res.truncated:
            buffer.extend(self.window.drain())
            self.episode += 1
            self.state = self.env.reset([self.seed, self.episode])
            return True
        return False


def _explore(agent: TD3Agent, actor_net, rng):
    b = agent.action_bound

    def policy(state):
        a = actor_net.forward(np.asarray(state).reshape(1, -1), cache=False)[0]
        a = a + rng.normal(0.0, agent.expl_noise * b, size=agent.action_dim)
        return np.clip(a, -b, b)

    return policy


def _train_single(config, agent, buffer, learner, worker_seed):
    actor = _Actor(config, worker_seed)
    policy = _explore(agent, agent.actor, actor.rng)
    for t in range(config.max_timesteps):
        actor.step(actor.act(policy, t), buffer)
        learner.after_env_step(t)


def _train_threaded(config, agent, buffer, learner, worker_seeds):
    """Actor threads share one step budget; the learner trains once per global step.

    A semaphore keeps actors at most one step each ahead of the learner.
    Workers refresh their policy snapshot at the start of every episode.
    """
    budget_lock = threading.Lock()
    next_step = [0]
    done_steps: queue.Queue = queue.Queue()
    slots = threading.Semaphore(len(worker_seeds))
    stop = threading.Event()
    errors: list[BaseException] = []

    def claim():
        with budget_lock:
            if next_step[0] >= config.max_timesteps or stop.is_set():
                return None
            t = next_step[0]
            next_step[0] += 1
            return t

    def worker(seed):
        try:
            actor = _Actor(config, seed)
            policy = _explore(agent, agent.actor_snapshot(), actor.rng)
            while True:
                slots.acquire()
                t = claim()
                if t is None:
                    slots.release()
                    break
                ended = actor.step(actor.act(policy, t), buffer)
                if ended:
                    policy = _explore(agent, agent.actor_snapshot(), actor.rng)
                done_steps.put(t)
        except BaseException as exc:  # surfaced in the learner thread
            errors.append(exc)
            stop.set()
            done_steps.put(None)

    threads = [threading.Thread(target=worker, args=(s,), daemon=True) for s in worker_seeds]
    for th in threads:
        th.start()
    try:
        for t in range(config.max_timesteps):
            if done_steps.get() is None:
                break
            learner.after_env_step(t)
            slots.release()
    finally:
        stop.set()
        for _ in threads:
            slots.release()
        for th in threads:
            th.join()
    if errors:
        raise errors[0]


def run_training(config: ExperimentConfig, out_dir=None) -> TrainingResult:
    """Train one agent.

    With ``out_dir`` set, writes ``metrics.csv`` (one row per evaluation,
    flushed as it goes), ``config.txt`` and ``checkpoint.npz``.  Single-worker
    runs are bit-reproducible from ``config.seed``.
    """
    config.validate()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(config.to_text())
    worker_seeds, eval_seed = derive_seeds(config.seed, config.workers)

    probe = build_env(config)
    agent = build_agent(config, probe)
    buffer = ReplayBuffer(config.buffer_size)
    sample_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    writer = _MetricsWriter(out / "metrics.csv" if out is not None else None)
    learner = _Learner(config, agent, buffer, sample_rng, build_env(config), eval_seed, writer)
    try:
        if config.workers == 1:
            _train_single(config, agent, buffer, learner, worker_seeds[0])
        else:
            _train_threaded(config, agent, buffer, learner, worker_seeds)
    except DivergenceError:
        log.error("training diverged; metrics up to this point are kept")
        raise
    finally:
        writer.close()

    ckpt = None
    if out is not None:
        ckpt = save_checkpoint(out / "checkpoint.npz", agent.networks(), checkpoint_meta(config, probe))
    return TrainingResult(config, learner.records, agent, buffer, writer.path, ckpt)


def checkpoint_meta(config: ExperimentConfig, env: Env) -> dict:
    return {
        "env": config.env,
        "state_dim": env.spec.state_dim,
        "action_dim": env.spec.action_dim,
        "action_bound": env.action_bound,
        "config": config.to_text(),
    }


def agent_from_checkpoint(path) -> tuple[TD3Agent, ExperimentConfig]:
    nets, meta = load_checkpoint(path)
    config = ExperimentConfig.from_text(meta["config"])
    agent = TD3Agent(meta["state_dim"], meta["action_dim"], width=config.width,
                     action_bound=meta["action_bound"], gamma=config.gamma, seed=config.seed)
    agent.load_networks(nets)
    return agent, config


def read_metrics(path) -> list[EvalRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        EvalRecord(int(r["step"]), float(r["mean_return"]), float(r["std_return"]),
                   float(r["q_mean"]), float(r["q_std_pct"]), float(r["critic_loss"]))
        for r in rows
    ]


@dataclass
class SuiteRow:
    name: str
    env: str
    estimator: str
    trials: int
    reward: float
    cv: float
    final_returns: list[float] = field(default_factory=list)


SUMMARY_HEADER = ("name", "env", "estimator", "trials", "reward", "cv")


def _tail_returns(records: list[EvalRecord], k: int = 5) -> list[float]:
    return [r.mean_return for r in records[-k:]]


def run_suite(configs, trials: int = 5, out_dir=None) -> list[SuiteRow]:
    """Run every config with mother seeds ``0..trials-1``.

    ``configs`` is a sequence of ``(name, ExperimentConfig)``.  The reward
    column is the mean of the last 5 evaluations pooled over trials and the
    CV is computed over the same pooled values.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    out = Path(out_dir) if out_dir is not None else None
    rows = []
    for name, cfg in configs:
        pooled = []
        for seed in range(trials):
            run_cfg = dataclasses.replace(cfg, seed=seed)
            run_dir = out / name / f"seed{seed}" if out is not None else None
            res = run_training(run_cfg, run_dir)
            pooled.extend(_tail_returns(res.records))
        try:
            cv = coefficient_of_variation(pooled)
        except ValueError:
            cv = math.nan
        rows.append(SuiteRow(name, cfg.env, cfg.kind.label, trials, float(np.mean(pooled)), cv, pooled))
    if out is not None:
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            for r in rows:
                w.writerow([r.name, r.env, r.estimator, r.trials, r.reward, r.cv])
    return rows


def load_suite_file(path) -> list[tuple[str, ExperimentConfig]]:
    """Read a suite file: ``[name]`` headers, each followed by ``key=value`` lines.

    Keys before the first header are shared defaults for every section.
    """
    sections: list[tuple[str, list[str]]] = [("", [])]
    for line in Path(path).read_text().splitlines():
        stripped = line.split("#", 1)[0].strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            sections.append((stripped[1:-1].strip(), []))
        else:
            sections[-1][1].append(line)
    shared = parse_key_values("\n".join(sections[0][1]))
    configs = []
    for name, lines in sections[1:]:
        mapping = dict(shared)
        mapping.update(parse_key_values("\n".join(lines)))
        base = ExperimentConfig.paper() if mapping.get("preset", "desk") == "paper" else None
        configs.append((name, ExperimentConfig.from_mapping(mapping, base)))
    if not configs:
        raise ValueError(f"{path}: no [name] sections")
    return configs
