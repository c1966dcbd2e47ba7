"""Standalone non-convex optimization benchmark.

Minimizes a sum of smooth saturating bumps under additive Gaussian gradient
noise, comparing the recursive-momentum optimizer against plain constant-step
stochastic gradient descent at matched noise.  The exact objective and
gradient are closed-form, so progress is measurable directly.
"""

from dataclasses import dataclass

import numpy as np

from .learners import StormState, storm_step
from .numkit import make_rng


def bump_objective(x, b):
    """J(x) = sum_i u_i^2 / (1 + u_i^2) with u = x - b.

    Each term saturates at 1 as |u| grows and vanishes at u = 0, so J is
    non-convex (concave in the tails) with a unique stationary point at b.
    """
    u = np.asarray(x, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sum(u * u / (1.0 + u * u)))


def bump_gradient(x, b):
    """Exact gradient: 2u / (1 + u^2)^2 per coordinate."""
    u = np.asarray(x, dtype=float) - np.asarray(b, dtype=float)
    return 2.0 * u / (1.0 + u * u) ** 2


@dataclass
class BenchResult:
    grad_norms: np.ndarray      # exact gradient norm per step
    objectives: np.ndarray      # exact objective per step
    x_final: np.ndarray


def run_storm(b, x0, steps, noise_std, rng, k=0.1, w=10.0, beta=100.0):
    """Recursive-momentum descent of the bump objective under gradient noise.

    Each step draws one shared noise vector and evaluates the stochastic
    gradient at both the current and previous iterates, exactly as the
    momentum correction requires.
    """
    x = np.array(x0, dtype=float)
    x_prev = x.copy()
    state = StormState(k=k, w=w, beta=beta)
    grad_norms = np.zeros(steps)
    objectives = np.zeros(steps)
    for t in range(steps):
        noise = noise_std * rng.standard_normal(x.size)
        g_now = -bump_gradient(x, b) + noise
        g_prev = -bump_gradient(x_prev, b) + noise
        state, g, eta = storm_step(state, g_now, g_prev)
        x_prev = x.copy()
        x = x + eta * g
        grad_norms[t] = float(np.linalg.norm(bump_gradient(x, b)))
        objectives[t] = bump_objective(x, b)
    return BenchResult(grad_norms, objectives, x)


def run_sgd(b, x0, steps, noise_std, rng, eta=0.1):
    """Plain constant-stepsize stochastic gradient descent baseline."""
    x = np.array(x0, dtype=float)
    grad_norms = np.zeros(steps)
    objectives = np.zeros(steps)
    for t in range(steps):
        noise = noise_std * rng.standard_normal(x.size)
        g = -bump_gradient(x, b) + noise
        x = x + eta * g
        grad_norms[t] = float(np.linalg.norm(bump_gradient(x, b)))
        objectives[t] = bump_objective(x, b)
    return BenchResult(grad_norms, objectives, x)


def compare(dim=10, steps=2000, noise_std=0.5, n_trials=5, seed=0,
            k=0.1, w=10.0, beta=100.0, sgd_eta=0.1, tail_frac=0.25):
    """Average tail gradient norm of both optimizers over matched trials.

    Returns a dict with per-optimizer tail means; lower is better (both are
    minimizing the bump objective toward its unique stationary point).
    """
    tail = max(1, int(steps * tail_frac))
    storm_tails = np.zeros(n_trials)
    sgd_tails = np.zeros(n_trials)
    for i in range(n_trials):
        rng = make_rng(seed + i)
        b = rng.standard_normal(dim)
        x0 = b + rng.uniform(1.0, 2.0, size=dim) * np.where(
            rng.uniform(size=dim) < 0.5, -1.0, 1.0)
        storm_res = run_storm(b, x0, steps, noise_std, make_rng(seed + i + 500),
                              k=k, w=w, beta=beta)
        sgd_res = run_sgd(b, x0, steps, noise_std, make_rng(seed + i + 500),
                          eta=sgd_eta)
        storm_tails[i] = storm_res.grad_norms[-tail:].mean()
        sgd_tails[i] = sgd_res.grad_norms[-tail:].mean()
    return {
        "storm_tail_grad_norm": float(storm_tails.mean()),
        "sgd_tail_grad_norm": float(sgd_tails.mean()),
        "storm_per_trial": storm_tails,
        "sgd_per_trial": sgd_tails,
    }
