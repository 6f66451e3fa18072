"""Command line entry point: ``lnss {train,eval,suite,psi-table,variance-study}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .harness import (
    ExperimentConfig,
    METRICS_HEADER,
    agent_from_checkpoint,
    build_env,
    derive_seeds,
    load_suite_file,
    parse_key_values,
    run_evaluation,
    run_suite,
    run_training,
)
from .neural import DivergenceError
from .variance import psi_table, simulate_q_iteration

# CLI flag -> config key
TRAIN_FLAGS = {
    "env": str, "estimator": str, "N": int, "n": int, "seed": int, "max_timesteps": int,
    "eval_freq": int, "start_timesteps": int, "batch": int, "buffer": int, "gamma": float,
    "tau": float, "workers": int, "reward_shift": float, "width": int, "dist": str,
}
_RENAMED = {"batch": "batch_size", "buffer": "buffer_size"}
_HELP = {
    "env": "chain, pointmass or pendulum",
    "estimator": "single, nstep, mean or lnss",
    "N": "surrogate window length (lnss)",
    "n": "bootstrap step count (nstep, mean, lnss)",
    "seed": "mother seed; worker i uses seed+i, evaluation seed+100",
    "dist": "chain reward: uniform, const:<c> or bern:<p>",
    "reward_shift": "added to training rewards, floored at zero",
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_train(sub):
    p = sub.add_parser("train", help="train one agent and write metrics.csv + checkpoint")
    for name, typ in TRAIN_FLAGS.items():
        p.add_argument(_flag(name), dest=name, type=typ, default=None, help=_HELP.get(name))
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--config", type=Path, help="key=value config file; flags override it")
    p.add_argument("--out", type=Path, required=True, help="directory for config.txt, metrics.csv, checkpoint.npz")
    p.set_defaults(func=cmd_train)


def config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.paper() if args.preset == "paper" else ExperimentConfig.desk()
    if args.config is not None:
        mapping = parse_key_values(args.config.read_text())
        if mapping.get("preset") == "paper":
            base = ExperimentConfig.paper()
        base = ExperimentConfig.from_mapping(mapping, base)
    overrides = {
        _RENAMED.get(k, k): getattr(args, k) for k in TRAIN_FLAGS if getattr(args, k) is not None
    }
    return ExperimentConfig.from_mapping(overrides, base)


def cmd_train(args) -> int:
    config = config_from_args(args)
    res = run_training(config, args.out)
    print(f"wrote {res.metrics_path} ({len(res.records)} evaluations) and {res.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    agent, config = agent_from_checkpoint(args.checkpoint)
    if args.env is not None:
        config = ExperimentConfig.from_mapping({"env": args.env}, config)
    seed = args.seed if args.seed is not None else derive_seeds(config.seed, 1)[1]
    rec = run_evaluation(agent, build_env(config), seed, config.eval_episodes)
    w = csv.writer(sys.stdout)
    w.writerow(METRICS_HEADER)
    w.writerow(rec.row())
    return 0


def cmd_suite(args) -> int:
    rows = run_suite(load_suite_file(args.configs), args.trials, args.out)
    w = csv.writer(sys.stdout)
    w.writerow(("name", "env", "estimator", "trials", "reward", "cv"))
    for r in rows:
        w.writerow([r.name, r.env, r.estimator, r.trials, r.reward, r.cv])
    return 0


def _open_out(path):
    return open(path, "w", newline="") if path is not None else sys.stdout


def cmd_psi_table(args) -> int:
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh)
        w.writerow(("gamma", "N", "psi"))
        for row in psi_table(args.gamma, args.N_max):
            w.writerow(row)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_variance_study(args) -> int:
    single, lnss = simulate_q_iteration(args.gamma, args.N, args.trials, args.iterations, args.dist, args.seed)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh)
        w.writerow(("iteration", "var_single", "bound_single", "var_lnss", "bound_lnss"))
        for i in range(single.iterations):
            w.writerow([i + 1, single.empirical_var[i], single.bound[i], lnss.empirical_var[i], lnss.bound[i]])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lnss", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_train(sub)

    p = sub.add_parser("eval", help="evaluate a checkpoint over 5 episodes")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--env", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("suite", help="run several configs over mother seeds 0..trials-1")
    p.add_argument("--configs", type=Path, required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("psi-table", help="CSV of the variance discount factor")
    p.add_argument("--gamma", type=float, nargs="+", default=[0.9, 0.99, 0.999])
    p.add_argument("--N-max", dest="N_max", type=int, default=100)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_psi_table)

    p = sub.add_parser("variance-study", help="Monte Carlo Q-variance traces against their bounds")
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--N", type=int, default=50)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--dist", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_variance_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
