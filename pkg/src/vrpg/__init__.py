"""Variance-reduced off-policy policy-gradient algorithms.

Implements recursive-momentum actor updates on emphatic off-policy policy
gradients (with and without density-ratio reweighting), their constant-step
baselines, exact tabular dynamic programming for ground truth, built-in
environments, and a reproducible experiment harness.
"""

from .agents import ALGORITHMS, Agent, TrainLog, output_policy, train
from .envs import CartPole, ContinuingCartPole, ContinuingTabular, TabularMdp, \
    Transition, two_circle
from .harness import RunConfig, load_config, run_experiment
from .learners import RatioLearner, StormState, TdCritic, storm_step
from .policies import GaussianMlpPolicy, TabularSoftmaxPolicy

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "Agent", "TrainLog", "output_policy", "train",
    "CartPole", "ContinuingCartPole", "ContinuingTabular", "TabularMdp",
    "Transition", "two_circle",
    "RunConfig", "load_config", "run_experiment",
    "RatioLearner", "StormState", "TdCritic", "storm_step",
    "GaussianMlpPolicy", "TabularSoftmaxPolicy",
    "__version__",
]
