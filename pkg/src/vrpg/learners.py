"""Incremental learners.

Semi-gradient TD critic, semi-gradient density-ratio learner, and the
recursive-momentum optimizer with its adaptive stepsize schedule (shared by
the actor update and the standalone non-convex benchmark).
"""

from dataclasses import dataclass

import numpy as np


class TdCritic:
    """One-step semi-gradient TD.

    delta = r + gamma_t * V(s') - V(s), computed with the pre-update
    parameters; only the V(s) prediction term is differentiated.
    """

    def __init__(self, value_fn, alpha):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"critic stepsize must be in [0, 1], got {alpha}")
        self.value_fn = value_fn
        self.alpha = alpha

    def update(self, tr, gamma_t):
        delta = tr.r + gamma_t * self.value_fn.value(tr.s_next) \
            - self.value_fn.value(tr.s)
        self.value_fn.update(self.alpha * delta * self.value_fn.grad(tr.s))
        return delta


class RatioLearner:
    """Semi-gradient update driving C toward the density-ratio fixed point.

    Target: gamma_hat * rho * C(s) + (1 - gamma_hat) - C(s'), differentiated
    only through the C(s') prediction.
    """

    def __init__(self, ratio_fn, alpha, gamma_hat):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"ratio stepsize must be in [0, 1], got {alpha}")
        if not 0.0 <= gamma_hat < 1.0:
            raise ValueError(f"gamma_hat must be in [0, 1), got {gamma_hat}")
        self.ratio_fn = ratio_fn
        self.alpha = alpha
        self.gamma_hat = gamma_hat

    def update(self, tr, rho):
        err = (self.gamma_hat * rho * self.ratio_fn.value(tr.s)
               + (1.0 - self.gamma_hat) - self.ratio_fn.value(tr.s_next))
        self.ratio_fn.update(self.alpha * err * self.ratio_fn.grad(tr.s_next))
        return err


@dataclass
class StormState:
    """Recursive-momentum accumulator with the cube-root stepsize schedule."""

    k: float
    w: float
    beta: float
    g: np.ndarray = None
    sum_g2: float = 0.0
    eta_prev: float = None

    def __post_init__(self):
        if self.eta_prev is None:
            # Consistent with the stepsize formula at an empty squared-norm sum.
            self.eta_prev = self.k / self.w ** (1.0 / 3.0)


def storm_step(state, grad_now, grad_prev, force_alpha_one=False):
    """One recursive-momentum step.

    momentum weight alpha = min(1, beta * eta_prev^2); the estimate is
        g <- grad_now + (1 - alpha) * (g - grad_prev)
    where both gradients were computed on the same sample at the current and
    previous iterates.  Returns (state, g, eta) with the new stepsize
    eta = k / (w + sum of squared gradient norms)^(1/3).  The first step (or
    alpha = 1) reduces to the plain stochastic gradient.
    """
    if not np.all(np.isfinite(grad_now)) or not np.all(np.isfinite(grad_prev)):
        raise FloatingPointError("non-finite gradient passed to storm_step")
    alpha = 1.0 if force_alpha_one else min(1.0, state.beta * state.eta_prev ** 2)
    if state.g is None or alpha >= 1.0:
        g = np.array(grad_now, dtype=float, copy=True)
    else:
        g = grad_now + (1.0 - alpha) * (state.g - grad_prev)
    sum_g2 = state.sum_g2 + float(np.dot(grad_now, grad_now))
    eta = state.k / (state.w + sum_g2) ** (1.0 / 3.0)
    return StormState(k=state.k, w=state.w, beta=state.beta, g=g,
                      sum_g2=sum_g2, eta_prev=eta), g, eta
