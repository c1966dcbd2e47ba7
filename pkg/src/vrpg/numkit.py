"""Minimal dense numerical kernel.

Small fixed-architecture MLPs with exact manual backpropagation, a checked
dense linear solve, and seeded random number streams.  Everything is float64.
"""

import numpy as np


class LinearSolveError(ValueError):
    """Raised when a linear system is singular or too ill-conditioned to trust."""


def make_rng(seed):
    """Deterministic random stream for a 64-bit seed.

    Equal seeds give identical streams; distinct seeds give statistically
    independent streams (PCG64).
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def solve_linear(A, b, tol=1e-10):
    """Solve Ax = b, guaranteeing ||Ax - b||_inf <= tol * (1 + ||b||_inf).

    Raises LinearSolveError on singular or ill-conditioned systems instead of
    returning garbage.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected square matrix, got shape {A.shape}")
    if b.shape != (A.shape[0],):
        raise ValueError(f"shape mismatch: A is {A.shape}, b is {b.shape}")
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise LinearSolveError(f"singular system: {e}") from None
    residual = np.max(np.abs(A @ x - b))
    if not np.isfinite(residual) or residual > tol * (1.0 + np.max(np.abs(b))):
        raise LinearSolveError(
            f"ill-conditioned system: residual {residual:.3e} exceeds tolerance"
        )
    return x


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    out = np.empty_like(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Mlp:
    """Two-hidden-layer perceptron with ReLU hidden units and linear output.

    Parameters live in six arrays (W1, b1, W2, b2, W3, b3) and are exposed as a
    single flat float64 vector so optimizers and traces can treat them
    uniformly.  Hidden layers are initialized scaled-uniform in
    +-sqrt(6/(fan_in+fan_out)); the output layer starts at zero so the initial
    network is the constant zero function.
    """

    def __init__(self, in_dim, out_dim, rng=None, hidden=64):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.hidden = hidden
        if rng is None:
            self.W1 = np.zeros((hidden, in_dim))
            self.W2 = np.zeros((hidden, hidden))
        else:
            lim1 = np.sqrt(6.0 / (in_dim + hidden))
            lim2 = np.sqrt(6.0 / (hidden + hidden))
            self.W1 = rng.uniform(-lim1, lim1, size=(hidden, in_dim))
            self.W2 = rng.uniform(-lim2, lim2, size=(hidden, hidden))
        self.b1 = np.zeros(hidden)
        self.b2 = np.zeros(hidden)
        self.W3 = np.zeros((out_dim, hidden))
        self.b3 = np.zeros(out_dim)

    @property
    def n_params(self):
        return (self.W1.size + self.b1.size + self.W2.size + self.b2.size
                + self.W3.size + self.b3.size)

    def get_flat(self):
        return np.concatenate([
            self.W1.ravel(), self.b1, self.W2.ravel(), self.b2,
            self.W3.ravel(), self.b3,
        ])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        i = 0
        for arr in (self.W1, self.b1, self.W2, self.b2, self.W3, self.b3):
            arr[...] = flat[i:i + arr.size].reshape(arr.shape)
            i += arr.size

    def forward(self, x):
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise ValueError(f"expected input of length {self.in_dim}, got {x.shape}")
        z1 = self.W1 @ x + self.b1
        h1 = np.maximum(z1, 0.0)
        z2 = self.W2 @ h1 + self.b2
        h2 = np.maximum(z2, 0.0)
        y = self.W3 @ h2 + self.b3
        return y, (x, z1, h1, z2, h2)

    def backward(self, cache, upstream):
        """Gradient of upstream . output with respect to the flat parameters."""
        upstream = np.asarray(upstream, dtype=float)
        if upstream.shape != (self.out_dim,):
            raise ValueError(
                f"expected upstream of length {self.out_dim}, got {upstream.shape}")
        x, z1, h1, z2, h2 = cache
        dW3 = np.outer(upstream, h2)
        db3 = upstream
        dz2 = (self.W3.T @ upstream) * (z2 > 0.0)
        dW2 = np.outer(dz2, h1)
        db2 = dz2
        dz1 = (self.W2.T @ dz2) * (z1 > 0.0)
        dW1 = np.outer(dz1, x)
        db1 = dz1
        return np.concatenate([
            dW1.ravel(), db1, dW2.ravel(), db2, dW3.ravel(), db3,
        ])

    def grad(self, x, upstream):
        _, cache = self.forward_cached(x)
        return self.backward(cache, upstream)
