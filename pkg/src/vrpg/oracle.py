"""Exact tabular dynamic programming.

Stationary distributions, the interpolated state distribution d(gamma_hat),
value functions, exact density ratios, exact objectives, and a
finite-difference exact policy gradient.  This module is the ground truth
against which every sampled estimator in the package is tested.
"""

import numpy as np

from .numkit import solve_linear
from .policies import TabularSoftmaxPolicy


class NonErgodicError(ValueError):
    """Raised when a chain has no unique stationary distribution at tolerance."""


def uniform_policy(mdp):
    return [np.full(n, 1.0 / n) for n in mdp.n_actions]


def deterministic_policy(mdp, choice):
    """Policy putting mass 1 on choice[s] (or action 0 where unspecified)."""
    table = []
    for s in range(mdp.n_states):
        row = np.zeros(mdp.n_actions[s])
        row[choice.get(s, 0) if isinstance(choice, dict) else choice[s]] = 1.0
        table.append(row)
    return table


def transition_under(mdp, pi):
    """State-to-state transition matrix P_pi(s'|s) = sum_a pi(a|s) p(s'|s,a)."""
    P = np.zeros((mdp.n_states, mdp.n_states))
    for s in range(mdp.n_states):
        if len(pi[s]) != mdp.n_actions[s]:
            raise ValueError(f"policy row {s} has wrong action count")
        for a in range(mdp.n_actions[s]):
            P[s] += pi[s][a] * mdp.P[s][a]
    return P


def expected_reward(mdp, pi):
    r = np.zeros(mdp.n_states)
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions[s]):
            r[s] += pi[s][a] * float(mdp.P[s][a] @ mdp.R[s][a])
    return r


def stationary(P, tol=1e-10):
    """Unique stationary distribution of a stochastic matrix.

    Solves (P^T - I) d = 0 with the normalization sum(d) = 1 substituted for
    the last (redundant) balance equation.  Periodic but irreducible chains are
    fine; chains without a unique stationary distribution raise.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    M = P.T - np.eye(n)
    M[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        d = solve_linear(M, b)
    except Exception as e:
        raise NonErgodicError(f"no unique stationary distribution: {e}") from None
    if np.max(np.abs(P.T @ d - d)) > tol or np.any(d < -tol):
        raise NonErgodicError("no valid stationary fixed point at tolerance")
    return np.maximum(d, 0.0)


def d_hat_gamma(P_pi, d_mu, gamma_hat):
    """Solve d = gamma_hat P_pi^T d + (1 - gamma_hat) d_mu; stationary(P_pi) at 1."""
    if not 0.0 <= gamma_hat <= 1.0:
        raise ValueError(f"gamma_hat must be in [0, 1], got {gamma_hat}")
    if gamma_hat == 1.0:
        return stationary(P_pi)
    n = P_pi.shape[0]
    d = solve_linear(np.eye(n) - gamma_hat * np.asarray(P_pi).T,
                     (1.0 - gamma_hat) * np.asarray(d_mu, dtype=float))
    return d


def value_function(mdp, pi):
    """Exact V_pi via (I - gamma P_pi) V = r_pi."""
    P = transition_under(mdp, pi)
    r = expected_reward(mdp, pi)
    return solve_linear(np.eye(mdp.n_states) - mdp.gamma * P, r)


def exact_density_ratio(mdp, pi, mu, gamma_hat):
    """d(gamma_hat)(s) / d_mu(s) per state."""
    d_mu = stationary(transition_under(mdp, mu))
    if np.any(d_mu <= 0.0):
        raise ValueError("behavior stationary distribution has a zero entry")
    d_g = d_hat_gamma(transition_under(mdp, pi), d_mu, gamma_hat)
    return d_g / d_mu


def objective(mdp, pi, mu, gamma_hat, interest=None):
    """Values of pi averaged under the gamma_hat-interpolated state distribution.

    gamma_hat=0 gives the behavior-weighted (excursion) objective; gamma_hat=1
    gives the target policy's own stationary weighting.
    """
    d_mu = stationary(transition_under(mdp, mu))
    d_g = d_hat_gamma(transition_under(mdp, pi), d_mu, gamma_hat)
    V = value_function(mdp, pi)
    i = np.ones(mdp.n_states) if interest is None else np.asarray(interest, float)
    return float(d_g @ (i * V))


def exact_gradient(mdp, mu, gamma_hat, theta_flat, interest=None, step=1e-6):
    """Central finite differences of the exact objective over softmax logits.

    Deliberately derivative-free so it is independent of every sampled
    estimator it certifies.
    """
    policy = TabularSoftmaxPolicy(mdp.n_actions)
    theta_flat = np.asarray(theta_flat, dtype=float)

    def J(theta):
        policy.set_flat(theta)
        return objective(mdp, policy.prob_table(), mu, gamma_hat, interest)

    grad = np.zeros(theta_flat.size)
    for j in range(theta_flat.size):
        up = theta_flat.copy()
        dn = theta_flat.copy()
        up[j] += step
        dn[j] -= step
        grad[j] = (J(up) - J(dn)) / (2.0 * step)
    return grad


def select_two_circle_scale(candidates, gamma_hat=0.2):
    """Certify which reward scales split the two objectives on the two-circle MDP.

    For each candidate c, enumerate the two deterministic policies at state A
    and check that the behavior-weighted objective prefers the A->C loop while
    the gamma_hat-interpolated objective prefers the A->B loop.  Returns
    (passing candidates, chosen default = midpoint of the passing set).
    """
    from .envs import two_circle

    passing = []
    for c in candidates:
        mdp = two_circle(c)
        mu = uniform_policy(mdp)
        pi_b = deterministic_policy(mdp, {0: 0})
        pi_c = deterministic_policy(mdp, {0: 1})
        j_mu_b = objective(mdp, pi_b, mu, 0.0)
        j_mu_c = objective(mdp, pi_c, mu, 0.0)
        j_g_b = objective(mdp, pi_b, mu, gamma_hat)
        j_g_c = objective(mdp, pi_c, mu, gamma_hat)
        if j_mu_c > j_mu_b and j_g_b > j_g_c:
            passing.append(c)
    chosen = passing[len(passing) // 2] if passing else None
    return passing, chosen
