"""Built-in environments.

The two-circle decision MDP, continuous-action cart-pole, the continuing-task
wrapper (per-step discount, reset on termination), and the multiplicative
action-noise wrapper.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Transition:
    s: object
    a: object
    r: float
    s_next: object
    terminal: bool = False


class TabularMdp:
    """Finite MDP with a possibly different action count per state.

    P[s][a] is a probability vector over next states, R[s][a] the reward per
    next state.
    """

    def __init__(self, P, R, gamma):
        self.n_states = len(P)
        self.n_actions = [len(P[s]) for s in range(self.n_states)]
        self.P = [[np.asarray(row, dtype=float) for row in P[s]]
                  for s in range(self.n_states)]
        self.R = [[np.asarray(row, dtype=float) for row in R[s]]
                  for s in range(self.n_states)]
        self.gamma = float(gamma)
        self._validate()

    def _validate(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {self.gamma}")
        for s in range(self.n_states):
            if self.n_actions[s] < 1:
                raise ValueError(f"state {s} has no actions")
            for a in range(self.n_actions[s]):
                p = self.P[s][a]
                if p.shape != (self.n_states,) or np.any(p < 0.0):
                    raise ValueError(f"bad transition row at (s={s}, a={a})")
                if abs(p.sum() - 1.0) > 1e-12:
                    raise ValueError(
                        f"P(.|s={s},a={a}) sums to {p.sum()!r}, not 1")
                if self.R[s][a].shape != (self.n_states,) or \
                        not np.all(np.isfinite(self.R[s][a])):
                    raise ValueError(f"bad reward row at (s={s}, a={a})")

    def step(self, s, a, rng):
        """Sample one transition. Tabular tasks here are continuing: never terminal."""
        p = self.P[s][a]
        s_next = int(rng.choice(self.n_states, p=p))
        return Transition(s, a, float(self.R[s][a][s_next]), s_next, False)


# Two-circle MDP: states A=0, B=1, C=2, D=3, E=4; the agent only chooses at A
# (action 0 -> B, action 1 -> C); cycles A->B->D->A and A->C->E->A; gamma=0.6.
# Rewards: +10 on B->D and +10*c on the A->C choice.  The scale c is pinned so
# that the two objectives the on-board algorithms optimize disagree about which
# loop is best (see oracle.select_two_circle_scale).
TWO_CIRCLE_REWARD_SCALE = 0.64
TWO_CIRCLE_STATES = ("A", "B", "C", "D", "E")
TWO_CIRCLE_INITIAL_STATE = 0


def two_circle(c=TWO_CIRCLE_REWARD_SCALE):
    n = 5
    A, B, C, D, E = range(n)

    def row(target):
        p = np.zeros(n)
        p[target] = 1.0
        return p

    P = [
        [row(B), row(C)],   # A: choose loop
        [row(D)],           # B -> D
        [row(E)],           # C -> E
        [row(A)],           # D -> A
        [row(A)],           # E -> A
    ]
    R = [[np.zeros(n) for _ in P[s]] for s in range(n)]
    R[B][0][D] = 10.0
    R[A][1][C] = 10.0 * c
    return TabularMdp(P, R, gamma=0.6)


# Classic cart-pole constants (Barto/Sutton), continuous force in [-10, 10] N.
CARTPOLE_GRAVITY = 9.8
CARTPOLE_CART_MASS = 1.0
CARTPOLE_POLE_MASS = 0.1
CARTPOLE_HALF_LENGTH = 0.5
CARTPOLE_FORCE_SCALE = 10.0
CARTPOLE_DT = 0.02
CARTPOLE_X_LIMIT = 2.4
CARTPOLE_THETA_LIMIT = 12.0 * math.pi / 180.0
CARTPOLE_MAX_EPISODE_STEPS = 200


def cartpole_terminal(state):
    x, _, theta, _ = state
    return abs(x) > CARTPOLE_X_LIMIT or abs(theta) > CARTPOLE_THETA_LIMIT


def cartpole_step(state, action):
    """One explicit-Euler step of the cart-pole dynamics.

    Action is a scalar in [-1, 1] (clamped), scaled to force.  Reward is +1 per
    step.  The returned terminal flag reflects only the state thresholds; the
    episode step cap is enforced by CartPole.
    """
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise ValueError(f"non-finite cart-pole state: {state}")
    a = float(np.asarray(action).flat[0] if np.ndim(action) else action)
    force = CARTPOLE_FORCE_SCALE * min(1.0, max(-1.0, a))
    x, x_dot, theta, theta_dot = state
    total_mass = CARTPOLE_CART_MASS + CARTPOLE_POLE_MASS
    pole_ml = CARTPOLE_POLE_MASS * CARTPOLE_HALF_LENGTH
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + pole_ml * theta_dot ** 2 * sin_t) / total_mass
    theta_acc = (CARTPOLE_GRAVITY * sin_t - cos_t * temp) / (
        CARTPOLE_HALF_LENGTH * (4.0 / 3.0 - CARTPOLE_POLE_MASS * cos_t ** 2 / total_mass))
    x_acc = temp - pole_ml * theta_acc * cos_t / total_mass
    new = np.array([
        x + CARTPOLE_DT * x_dot,
        x_dot + CARTPOLE_DT * x_acc,
        theta + CARTPOLE_DT * theta_dot,
        theta_dot + CARTPOLE_DT * theta_acc,
    ])
    return new, 1.0, cartpole_terminal(new)


class CartPole:
    """Continuous-action cart-pole episode machine.

    State is (x, x_dot, theta, theta_dot); actions live in [-1, 1].  Episodes
    terminate on the position/angle thresholds or after 200 steps.
    """

    state_dim = 4
    action_dim = 1

    def __init__(self):
        self.state = None
        self.episode_steps = 0

    def reset(self, rng):
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self.episode_steps = 0
        return self.state

    def step(self, action):
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        self.state, reward, terminal = cartpole_step(self.state, action)
        self.episode_steps += 1
        if self.episode_steps >= CARTPOLE_MAX_EPISODE_STEPS:
            terminal = True
        return self.state, reward, terminal


class ContinuingCartPole:
    """Continuing-task view of cart-pole.

    Emits per-step discount 0.99 on non-terminal transitions and 0 on terminal
    ones, then resets to a fresh initial state so the stream never stops.
    """

    gamma = 0.99

    def __init__(self, rng, action_noise_frac=0.0):
        self.env = CartPole()
        self.rng = rng
        self.action_noise_frac = action_noise_frac
        self.state = self.env.reset(rng)

    def step(self, action):
        s = self.state
        executed = action
        if self.action_noise_frac:
            # The perturbation is unobserved actuator noise: the noised action
            # drives the dynamics, but the transition records the commanded
            # action, which is what densities and ratios are defined over.
            executed = noisy_action(np.atleast_1d(action),
                                    self.action_noise_frac, self.rng)[0]
        s_next, r, terminal = self.env.step(executed)
        tr = Transition(s, action, r, s_next, terminal)
        gamma_t = 0.0 if terminal else self.gamma
        if terminal:
            self.state = self.env.reset(self.rng)
        else:
            self.state = s_next
        return tr, gamma_t


class ContinuingTabular:
    """Continuing-task view of a TabularMdp (no terminals; discount is the MDP's own)."""

    def __init__(self, mdp, rng, initial_state=0):
        self.mdp = mdp
        self.rng = rng
        self.state = initial_state

    @property
    def gamma(self):
        return self.mdp.gamma

    def step(self, action):
        tr = self.mdp.step(self.state, action, self.rng)
        self.state = tr.s_next
        return tr, self.mdp.gamma


def noisy_action(a, noise_frac, rng):
    """Multiply each action component by 1 +- noise_frac * chi, chi ~ U[0,1].

    The sign is drawn independently per component, so the factor is symmetric
    around 1 and always inside [1 - noise_frac, 1 + noise_frac].
    """
    a = np.asarray(a, dtype=float)
    if not 0.0 <= noise_frac <= 1.0:
        raise ValueError(f"noise_frac must be in [0, 1], got {noise_frac}")
    if noise_frac == 0.0:
        return a
    chi = rng.uniform(0.0, 1.0, size=a.shape)
    sign = np.where(rng.uniform(size=a.shape) < 0.5, -1.0, 1.0)
    return a * (1.0 + sign * noise_frac * chi)
