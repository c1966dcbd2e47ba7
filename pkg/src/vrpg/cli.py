"""Command-line entry point.

Subcommands: `run` (train from a configuration file), `oracle` (print exact
dynamic-programming quantities for a tabular environment), `bench-storm`
(the standalone optimizer benchmark), and `eval` (roll out a saved policy).
"""

import argparse
import csv
import sys

import numpy as np

from . import bench, harness
from .harness import ConfigError
from .numkit import make_rng
from .policies import GaussianMlpPolicy, TabularSoftmaxPolicy, load_params
from .envs import two_circle


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vrpg",
        description="Variance-reduced off-policy policy-gradient toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train from a configuration file")
    run.add_argument("config", help="path to a key = value configuration file")
    run.add_argument("--seed", type=int, default=None,
                     help="train a single seed, overriding the config's list")
    run.add_argument("--steps", type=int, default=None,
                     help="override total training steps")
    run.add_argument("--out", default=None, help="override the output directory")
    run.add_argument("--workers", type=int, default=None,
                     help="override the process-pool size")

    orc = sub.add_parser("oracle", help="print exact tabular quantities")
    orc.add_argument("env", nargs="?", default="two-circle")
    orc.add_argument("--gamma-hat", type=float, default=0.2)
    orc.add_argument("--out", default=None, help="write CSV here instead of stdout")

    bn = sub.add_parser("bench-storm", help="optimizer benchmark on a bump objective")
    bn.add_argument("--dim", type=int, default=10)
    bn.add_argument("--steps", type=int, default=2000)
    bn.add_argument("--noise-std", type=float, default=0.5)
    bn.add_argument("--trials", type=int, default=5)
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--sgd-eta", type=float, default=0.1)

    ev = sub.add_parser("eval", help="roll out a saved policy snapshot")
    ev.add_argument("params", help="parameter snapshot written by a training run")
    ev.add_argument("env", nargs="?", default="cartpole",
                    choices=harness.ENVIRONMENTS)
    ev.add_argument("--rollouts", type=int, default=20)
    ev.add_argument("--seed", type=int, default=0)
    return parser


def cmd_run(args):
    config = harness.load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seeds"] = [args.seed]
    if args.steps is not None:
        updates["total_steps"] = args.steps
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.workers is not None:
        updates["workers"] = args.workers
    if updates:
        import dataclasses
        config = dataclasses.replace(config, **updates)
    _, agg, paths = harness.run_experiment(config)
    last = agg[-1]
    print(f"{config.name}: {len(config.seeds)} seed(s), "
          f"{config.total_steps} steps each")
    print(f"final return (mean over seeds): {last['mc_return_mean']:.4f} "
          f"+- {last['mc_return_std']:.4f}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_oracle(args):
    rows = harness.oracle_report(args.env, args.gamma_hat)
    columns = list(rows[0].keys())
    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=columns)
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.out}")
    else:
        print("\t".join(columns))
        for row in rows:
            print("\t".join(f"{v:.6f}" if isinstance(v, float) else str(v)
                            for v in row.values()))
    return 0


def cmd_bench(args):
    result = bench.compare(dim=args.dim, steps=args.steps,
                           noise_std=args.noise_std, n_trials=args.trials,
                           seed=args.seed, sgd_eta=args.sgd_eta)
    print(f"tail gradient norm over {args.trials} trial(s):")
    print(f"  recursive momentum: {result['storm_tail_grad_norm']:.6f}")
    print(f"  constant-step sgd : {result['sgd_tail_grad_norm']:.6f}")
    return 0


def cmd_eval(args):
    params = load_params(args.params)
    rng = make_rng(args.seed)
    if args.env == "cartpole":
        policy = GaussianMlpPolicy(4, 1, rng)
        policy.set_flat(params["policy"])
        stats = harness.evaluate_cartpole(policy, args.rollouts, 200, 0.99, rng)
        print(f"episodic return: {stats['episodic_mean']:.2f} over "
              f"{args.rollouts} rollouts (mean length {stats['length_mean']:.1f})")
    else:
        mdp = two_circle()
        policy = TabularSoftmaxPolicy(mdp.n_actions)
        policy.set_flat(params["policy"])
        mc, std = harness.evaluate_tabular(mdp, policy, args.rollouts, 100, rng)
        print(f"discounted return: {mc:.4f} +- {std:.4f} over "
              f"{args.rollouts} rollouts")
        print(f"P(choose first loop at the decision state): "
              f"{policy.probs(0)[0]:.4f}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "oracle": cmd_oracle,
                "bench-storm": cmd_bench, "eval": cmd_eval}
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
