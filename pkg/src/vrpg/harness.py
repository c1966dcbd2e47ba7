"""Experiment orchestration.

Run configuration files, Monte-Carlo evaluation, multi-seed training with
deterministic per-seed streams, window smoothing, and CSV emission.
"""

import concurrent.futures
import csv
import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .agents import Agent, TrainLog, train
from .envs import ContinuingCartPole, ContinuingTabular, noisy_action, \
    two_circle, TWO_CIRCLE_INITIAL_STATE
from .learners import RatioLearner, StormState, TdCritic
from .numkit import make_rng
from .policies import (
    DEFAULT_GAUSSIAN_SIGMA, DEFAULT_RHO_MAX, GaussianMlpPolicy, MlpRatioFn,
    MlpValueFn, TabularRatioFn, TabularSoftmaxPolicy, TabularValueFn,
    UniformBoxBehavior, UniformDiscreteBehavior,
)

ENVIRONMENTS = ("two-circle", "cartpole")


class ConfigError(ValueError):
    """Bad run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    env: str = "two-circle"
    algorithm: str = "vomps"
    gamma: float = None             # defaults to the environment's convention
    gamma_hat: float = 0.2
    lam1: float = 0.7
    lam2: float = 0.6
    alpha_v: float = 0.05
    alpha_c: float = 0.05
    k: float = 0.1
    w: float = 10.0
    beta: float = 100.0
    eta: float = 0.01               # baselines' constant actor stepsize
    rho_max: float = DEFAULT_RHO_MAX
    z_max: float = 100.0            # gradient-sample norm clip
    sigma: float = DEFAULT_GAUSSIAN_SIGMA
    seeds: list = field(default_factory=lambda: list(range(10)))
    total_steps: int = 30000
    eval_interval: int = 1000
    eval_rollouts: int = 20
    eval_horizon: int = None        # defaults: 100 tabular, 200 cartpole
    action_noise_frac: float = 0.0
    dp_critic: bool = None          # defaults: True on tabular, False otherwise
    workers: int = 1
    checkpoint_every: int = 100
    out_dir: str = "results"
    name: str = None                # output file stem; defaults to env_algorithm

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"env: unknown environment {self.env!r}")
        if self.algorithm not in ("vomps", "ace-storm", "geoffpac", "ace"):
            raise ConfigError(f"algorithm: unknown algorithm {self.algorithm!r}")
        if self.gamma is None:
            self.gamma = 0.6 if self.env == "two-circle" else 0.99
        if self.eval_horizon is None:
            self.eval_horizon = 100 if self.env == "two-circle" else 200
        if self.dp_critic is None:
            self.dp_critic = self.env == "two-circle"
        if self.name is None:
            self.name = f"{self.env}_{self.algorithm}".replace("-", "_")
        for fname, lo, hi in (("gamma", 0.0, 1.0), ("gamma_hat", 0.0, 1.0),
                              ("lam1", 0.0, 1.0), ("lam2", 0.0, 1.0),
                              ("alpha_v", 0.0, 1.0), ("alpha_c", 0.0, 1.0),
                              ("action_noise_frac", 0.0, 1.0)):
            v = getattr(self, fname)
            if not lo <= v <= hi:
                raise ConfigError(f"{fname}: {v} outside [{lo}, {hi}]")
        for fname in ("k", "w", "beta", "eta", "rho_max", "z_max", "sigma"):
            if getattr(self, fname) <= 0:
                raise ConfigError(f"{fname}: must be positive")
        for fname in ("total_steps", "eval_interval", "eval_rollouts",
                      "eval_horizon", "workers", "checkpoint_every"):
            if int(getattr(self, fname)) < 1:
                raise ConfigError(f"{fname}: must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds: must be non-empty")

    def as_dict(self):
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(RunConfig)}


def parse_config_text(text):
    """Parse the flat `key = value` run-configuration format."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = _convert(key, value)
    return RunConfig(**values)


def _convert(key, value):
    if key == "seeds":
        try:
            return [int(v) for v in value.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"seeds: expected comma-separated integers, got {value!r}")
    if key in ("env", "algorithm", "out_dir", "name"):
        return value
    if key == "dp_critic":
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"dp_critic: expected true/false, got {value!r}")
    if key in ("total_steps", "eval_interval", "eval_rollouts", "eval_horizon",
               "workers", "checkpoint_every"):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}")


def load_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror or e}")
    return parse_config_text(text)


# -- evaluation ---------------------------------------------------------------

def evaluate_tabular(mdp, policy, n_rollouts, horizon, rng):
    """Discounted Monte-Carlo return of the policy from the initial state."""
    returns = np.zeros(n_rollouts)
    for i in range(n_rollouts):
        s = TWO_CIRCLE_INITIAL_STATE
        discount = 1.0
        total = 0.0
        for _ in range(horizon):
            a = policy.sample(s, rng)
            tr = mdp.step(s, a, rng)
            total += discount * tr.r
            discount *= mdp.gamma
            s = tr.s_next
        returns[i] = total
    return float(returns.mean()), float(returns.std())


def evaluate_cartpole(policy, n_rollouts, horizon, gamma, rng,
                      action_noise_frac=0.0):
    """Per-episode Monte-Carlo return, episodic return, and balance length."""
    from .envs import CartPole

    mc = np.zeros(n_rollouts)
    episodic = np.zeros(n_rollouts)
    lengths = np.zeros(n_rollouts)
    for i in range(n_rollouts):
        env = CartPole()
        s = env.reset(rng)
        discount = 1.0
        for t in range(horizon):
            a = policy.sample(s, rng)
            if action_noise_frac:
                a = noisy_action(np.atleast_1d(a), action_noise_frac, rng)
            s, r, terminal = env.step(a[0] if np.ndim(a) else a)
            mc[i] += discount * r
            episodic[i] += r
            lengths[i] += 1
            discount *= 0.0 if terminal else gamma
            if terminal:
                break
    return {
        "mc_mean": float(mc.mean()), "mc_std": float(mc.std()),
        "episodic_mean": float(episodic.mean()),
        "length_mean": float(lengths.mean()),
    }


def smooth(series, window):
    """Trailing moving average; the first window-1 points average the prefix."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    series = np.asarray(series, dtype=float)
    out = np.empty_like(series)
    csum = np.cumsum(series)
    for i in range(series.size):
        lo = max(0, i - window + 1)
        out[i] = (csum[i] - (csum[lo - 1] if lo > 0 else 0.0)) / (i - lo + 1)
    return out


SMOOTH_WINDOW = 20

METRIC_COLUMNS = ("step", "seed", "mc_return", "mc_std", "episodic_return",
                  "pi_ab", "g_norm", "eta")


# -- per-seed training --------------------------------------------------------

def build_agent(config, rng):
    if config.env == "two-circle":
        mdp = two_circle()
        policy = TabularSoftmaxPolicy(mdp.n_actions)
        behavior = UniformDiscreteBehavior(mdp.n_actions)
        critic = None if config.dp_critic else TdCritic(
            TabularValueFn(mdp.n_states), config.alpha_v)
        ratio = None if config.dp_critic else RatioLearner(
            TabularRatioFn(mdp.n_states), config.alpha_c, config.gamma_hat)
        dp_mdp = mdp if config.dp_critic else None
    else:
        policy = GaussianMlpPolicy(4, 1, rng, sigma=config.sigma)
        behavior = UniformBoxBehavior(1)
        critic = TdCritic(MlpValueFn(4, rng), config.alpha_v)
        ratio = RatioLearner(MlpRatioFn(4, rng), config.alpha_c,
                             config.gamma_hat)
        dp_mdp = None

    uses_storm = config.algorithm in ("vomps", "ace-storm")
    uses_ratio = config.algorithm in ("vomps", "geoffpac")
    agent = Agent(
        config.algorithm, policy, behavior,
        gamma=config.gamma, gamma_hat=config.gamma_hat,
        lam1=config.lam1, lam2=config.lam2,
        critic=critic,
        ratio=ratio if uses_ratio else None,
        storm=StormState(k=config.k, w=config.w, beta=config.beta)
        if uses_storm else None,
        eta=None if uses_storm else config.eta,
        rho_max=config.rho_max, z_max=config.z_max, dp_mdp=dp_mdp)
    return agent


def run_seed(config, seed):
    """Train one seed and return its metric rows."""
    rng = make_rng(seed)
    agent = build_agent(config, rng)
    if config.env == "two-circle":
        task = ContinuingTabular(two_circle(), rng,
                                 initial_state=TWO_CIRCLE_INITIAL_STATE)
    else:
        task = ContinuingCartPole(rng, action_noise_frac=config.action_noise_frac)
    eval_rng = make_rng(seed + 10 ** 9)

    rows = []

    def hook(t, ag):
        if config.env == "two-circle":
            mc, mc_std = evaluate_tabular(task.mdp, ag.policy,
                                          config.eval_rollouts,
                                          config.eval_horizon, eval_rng)
        else:
            stats = evaluate_cartpole(ag.policy, config.eval_rollouts,
                                      config.eval_horizon, config.gamma,
                                      eval_rng, config.action_noise_frac)
            mc, mc_std = stats["mc_mean"], stats["mc_std"]
        row = {
            "step": t, "seed": seed, "mc_return": mc, "mc_std": mc_std,
            "episodic_return": np.nan, "pi_ab": np.nan,
            "g_norm": ag.last_g_norm, "eta": ag.last_eta,
        }
        if config.env == "two-circle":
            row["pi_ab"] = ag.policy.probs(0)[0]
            row["episodic_return"] = mc
        else:
            row["episodic_return"] = stats["episodic_mean"]
        rows.append(row)

    log = TrainLog(checkpoint_every=config.checkpoint_every)
    train(agent, task, config.total_steps, rng, hook=hook,
          hook_every=config.eval_interval, log=log)
    return rows


# -- orchestration and CSV ----------------------------------------------------

def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path, config, columns, rows):
    with open(path, "w", newline="") as f:
        for key, value in sorted(config.as_dict().items()):
            f.write(f"# {key} = {value}\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def aggregate(rows_by_seed):
    """Mean/std across seeds per step, plus a window-smoothed mean curve."""
    steps = sorted({row["step"] for rows in rows_by_seed for row in rows})
    by_step = {t: [] for t in steps}
    for rows in rows_by_seed:
        for row in rows:
            by_step[row["step"]].append(row)
    out = []
    for t in steps:
        mc = np.array([r["mc_return"] for r in by_step[t]])
        pi_ab = np.array([r["pi_ab"] for r in by_step[t]])
        out.append({
            "step": t,
            "mc_return_mean": float(mc.mean()),
            "mc_return_std": float(mc.std()),
            "pi_ab_mean": float(np.nanmean(pi_ab)) if not np.all(np.isnan(pi_ab))
            else np.nan,
        })
    smoothed = smooth([r["mc_return_mean"] for r in out], SMOOTH_WINDOW)
    for row, s in zip(out, smoothed):
        row["mc_return_smoothed"] = float(s)
    pi_series = [r["pi_ab_mean"] for r in out]
    if not np.any(np.isnan(pi_series)):
        pi_smoothed = smooth(pi_series, SMOOTH_WINDOW)
    else:
        pi_smoothed = [np.nan] * len(out)
    for row, s in zip(out, pi_smoothed):
        row["pi_ab_smoothed"] = float(s)
    return out


AGGREGATE_COLUMNS = ("step", "mc_return_mean", "mc_return_std",
                     "mc_return_smoothed", "pi_ab_mean", "pi_ab_smoothed")


def run_experiment(config):
    """Train every seed, write per-seed CSVs and one aggregate CSV.

    Returns (per-seed rows keyed by seed, aggregate rows, list of paths).
    """
    os.makedirs(config.out_dir, exist_ok=True)
    if config.workers > 1 and len(config.seeds) > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=config.workers) as pool:
            futures = {seed: pool.submit(run_seed, config, seed)
                       for seed in config.seeds}
            results = {seed: futures[seed].result() for seed in config.seeds}
    else:
        results = {seed: run_seed(config, seed) for seed in config.seeds}

    paths = []
    for seed in sorted(results):
        path = os.path.join(config.out_dir, f"{config.name}_seed{seed}.csv")
        _write_csv(path, config, METRIC_COLUMNS, results[seed])
        paths.append(path)
    agg = aggregate([results[s] for s in sorted(results)])
    agg_path = os.path.join(config.out_dir, f"{config.name}_aggregate.csv")
    _write_csv(agg_path, config, AGGREGATE_COLUMNS, agg)
    paths.append(agg_path)
    return results, agg, paths


def oracle_report(env_name, gamma_hat=0.2):
    """Dynamic-programming quantities for a named tabular environment, as rows."""
    if env_name != "two-circle":
        raise ConfigError(f"env: no tabular oracle for {env_name!r}")
    mdp = two_circle()
    mu = oracle.uniform_policy(mdp)
    P_mu = oracle.transition_under(mdp, mu)
    d_mu = oracle.stationary(P_mu)
    rows = []
    for label, choice in (("A->B", {0: 0}), ("A->C", {0: 1})):
        pi = oracle.deterministic_policy(mdp, choice)
        P_pi = oracle.transition_under(mdp, pi)
        d_pi = oracle.stationary(P_pi)
        d_g = oracle.d_hat_gamma(P_pi, d_mu, gamma_hat)
        V = oracle.value_function(mdp, pi)
        C = oracle.exact_density_ratio(mdp, pi, mu, gamma_hat)
        j_mu = oracle.objective(mdp, pi, mu, 0.0)
        j_g = oracle.objective(mdp, pi, mu, gamma_hat)
        for s in range(mdp.n_states):
            rows.append({
                "policy": label, "state": s, "d_mu": d_mu[s], "d_pi": d_pi[s],
                "d_gamma_hat": d_g[s], "V": V[s], "C": C[s],
                "J_mu": j_mu, "J_gamma_hat": j_g,
            })
    return rows
