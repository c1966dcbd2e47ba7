"""Parametric policies and function approximators.

Tabular softmax and diagonal-Gaussian-over-MLP policies with exact
log-probability gradients, table/MLP value functions, positive density-ratio
approximators, behavior policies, and importance ratios.  All parameter
vectors are flat float64 arrays so the trace and optimizer code can stay
representation-agnostic.
"""

import math
import struct

import numpy as np

from .numkit import Mlp, sigmoid, softplus

DEFAULT_GAUSSIAN_SIGMA = 0.5
DEFAULT_RHO_MAX = 10.0

LOG_2PI = math.log(2.0 * math.pi)


def _softmax(logits):
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


class TabularSoftmaxPolicy:
    """Per-state softmax over a possibly ragged action set."""

    def __init__(self, n_actions_per_state):
        self.n_actions = list(n_actions_per_state)
        self.offsets = np.cumsum([0] + self.n_actions)
        self.theta = np.zeros(self.offsets[-1])

    @property
    def n_params(self):
        return self.theta.size

    def get_flat(self):
        return self.theta.copy()

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != self.theta.shape:
            raise ValueError("parameter shape mismatch")
        self.theta = flat.copy()

    def _logits(self, s, flat=None):
        theta = self.theta if flat is None else flat
        return theta[self.offsets[s]:self.offsets[s + 1]]

    def probs(self, s, flat=None):
        return _softmax(self._logits(s, flat))

    def prob(self, s, a, flat=None):
        return self.probs(s, flat)[a]

    def prob_table(self):
        """Action probabilities per state, as a ragged list (oracle's policy form)."""
        return [self.probs(s) for s in range(len(self.n_actions))]

    def sample(self, s, rng):
        return int(rng.choice(self.n_actions[s], p=self.probs(s)))

    def log_prob(self, s, a, flat=None):
        p = self.probs(s, flat)
        return float(np.log(p[a]))

    def log_prob_grad(self, s, a, flat=None):
        """Exact grad of log pi(a|s): indicator - probs on the state block, 0 elsewhere."""
        g = np.zeros(self.n_params)
        p = self.probs(s, flat)
        block = -p
        block[a] += 1.0
        g[self.offsets[s]:self.offsets[s + 1]] = block
        return g


class GaussianMlpPolicy:
    """Diagonal Gaussian policy; the mean is tanh of an MLP of the state,
    sigma is fixed.

    Bounding the mean to the [-1, 1] action box keeps the policy's density
    over the box bounded away from zero, so importance ratios against a
    box-supported behavior policy can never vanish for every action at once.
    Sampled actions are clamped to the box after the draw; densities and
    gradients use the unclamped Gaussian around the bounded mean.
    """

    def __init__(self, state_dim, action_dim, rng, sigma=DEFAULT_GAUSSIAN_SIGMA):
        if sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.net = Mlp(state_dim, action_dim, rng)
        self.sigma = float(sigma)
        self.action_dim = action_dim

    @property
    def n_params(self):
        return self.net.n_params

    def get_flat(self):
        return self.net.get_flat()

    def set_flat(self, flat):
        self.net.set_flat(flat)

    def mean(self, s, flat=None):
        return self._with_params(
            flat, lambda: np.tanh(self.net.forward(np.asarray(s, float))))

    def _with_params(self, flat, fn):
        if flat is None:
            return fn()
        saved = self.net.get_flat()
        self.net.set_flat(flat)
        try:
            return fn()
        finally:
            self.net.set_flat(saved)

    def sample(self, s, rng):
        m = self.mean(s)
        a = m + self.sigma * rng.standard_normal(self.action_dim)
        return np.clip(a, -1.0, 1.0)

    def log_prob(self, s, a, flat=None):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        m = self.mean(s, flat)
        z = (a - m) / self.sigma
        return float(-0.5 * np.dot(z, z)
                     - self.action_dim * (math.log(self.sigma) + 0.5 * LOG_2PI))

    def density(self, s, a, flat=None):
        return math.exp(self.log_prob(s, a, flat))

    def log_prob_grad(self, s, a, flat=None):
        """(a - mean)/sigma^2 backpropagated through tanh and the mean network."""
        a = np.atleast_1d(np.asarray(a, dtype=float))

        def run():
            y, cache = self.net.forward_cached(np.asarray(s, float))
            m = np.tanh(y)
            upstream = (a - m) / self.sigma ** 2 * (1.0 - m ** 2)
            return self.net.backward(cache, upstream)

        return self._with_params(flat, run)


class UniformDiscreteBehavior:
    """Behavior policy: uniform over the legal actions of each state."""

    def __init__(self, n_actions_per_state):
        self.n_actions = list(n_actions_per_state)

    def sample(self, s, rng):
        return int(rng.integers(self.n_actions[s]))

    def prob(self, s, a):
        return 1.0 / self.n_actions[s]


class UniformBoxBehavior:
    """Behavior policy: uniform on the [-1, 1] action box."""

    def __init__(self, action_dim):
        self.action_dim = action_dim

    def sample(self, s, rng):
        return rng.uniform(-1.0, 1.0, size=self.action_dim)

    def density(self, s, a):
        return 0.5 ** self.action_dim


def importance_ratio(pi, mu, s, a, rho_max=DEFAULT_RHO_MAX):
    """pi/mu probability (or density) ratio, clipped to [0, rho_max]."""
    if hasattr(mu, "prob"):
        denom = mu.prob(s, a)
        num = pi.prob(s, a)
    else:
        denom = mu.density(s, a)
        num = pi.density(s, a)
    if denom <= 0.0:
        raise ValueError(f"behavior policy has zero mass at (s={s}, a={a})")
    return min(num / denom, rho_max)


class TabularValueFn:
    def __init__(self, n_states):
        self.table = np.zeros(n_states)

    def get_flat(self):
        return self.table.copy()

    def set_flat(self, flat):
        self.table = np.asarray(flat, dtype=float).copy()

    def value(self, s):
        return float(self.table[s])

    def grad(self, s):
        g = np.zeros(self.table.size)
        g[s] = 1.0
        return g

    def update(self, step):
        self.table += step


class MlpValueFn:
    def __init__(self, state_dim, rng):
        self.net = Mlp(state_dim, 1, rng)

    def get_flat(self):
        return self.net.get_flat()

    def set_flat(self, flat):
        self.net.set_flat(flat)

    def value(self, s):
        return float(self.net.forward(np.asarray(s, float))[0])

    def grad(self, s):
        return self.net.grad(np.asarray(s, float), np.ones(1))

    def update(self, step):
        self.net.set_flat(self.net.get_flat() + step)


# Raw ratio parameters pass through softplus, so C(s) > 0 by construction.
# Initial raw value softplus^{-1}(1) makes the ratio start at exactly 1.
RATIO_RAW_INIT = math.log(math.e - 1.0)


class TabularRatioFn:
    def __init__(self, n_states):
        self.raw = np.full(n_states, RATIO_RAW_INIT)

    def get_flat(self):
        return self.raw.copy()

    def set_flat(self, flat):
        self.raw = np.asarray(flat, dtype=float).copy()

    def value(self, s):
        return float(softplus(self.raw[s]))

    def grad(self, s):
        g = np.zeros(self.raw.size)
        g[s] = sigmoid(np.array([self.raw[s]]))[0]
        return g

    def update(self, step):
        self.raw += step


class MlpRatioFn:
    def __init__(self, state_dim, rng):
        self.net = Mlp(state_dim, 1, rng)
        self.net.b3[0] = RATIO_RAW_INIT

    def get_flat(self):
        return self.net.get_flat()

    def set_flat(self, flat):
        self.net.set_flat(flat)

    def value(self, s):
        return float(softplus(self.net.forward(np.asarray(s, float)))[0])

    def grad(self, s):
        y, cache = self.net.forward_cached(np.asarray(s, float))
        return self.net.backward(cache, sigmoid(y))

    def update(self, step):
        self.net.set_flat(self.net.get_flat() + step)


class PinnedRatioFn:
    """Ratio function frozen at C(s) = 1; ignores updates."""

    def value(self, s):
        return 1.0

    def grad(self, s):
        return np.zeros(0)

    def update(self, step):
        pass


_MAGIC = b"VRPGPAR1"


def save_params(path, named_arrays):
    """Write named float64 arrays: name, shape, raw 64-bit floats."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(named_arrays)))
        for name, arr in named_arrays.items():
            arr = np.asarray(arr, dtype="<f8", order="C")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.tobytes())


def load_params(path):
    with open(path, "rb") as f:
        if f.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a parameter snapshot file")
        (count,) = struct.unpack("<I", f.read(4))
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", f.read(4))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim)) if ndim else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8")
            out[name] = data.reshape(shape).copy()
        return out
