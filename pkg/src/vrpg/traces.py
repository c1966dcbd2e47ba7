"""Emphatic-weight machinery.

Follow-on traces, emphatic weights, and the per-step policy-gradient sample
Z_t, in two forms: the full variant with density-ratio reweighting and an
interest-gradient trace (used by VOMPS/GeoffPAC), and the simpler
interest-only variant (used by ACE/ACE-STORM).  The recursions are inherently
serial; states are small immutable records replaced each step.
"""

from dataclasses import dataclass

import numpy as np


def _check_finite(**named):
    for name, value in named.items():
        if not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite trace input: {name} = {value!r}")


@dataclass(frozen=True)
class GeoffTraceState:
    """Carries F1, F2, and the previous step's rho, ratio value, and score."""

    f1: float
    f2: np.ndarray
    rho_prev: float
    c_prev: float
    glp_prev: np.ndarray
    t: int

    @classmethod
    def initial(cls, n_params):
        return cls(f1=0.0, f2=np.zeros(n_params), rho_prev=1.0, c_prev=1.0,
                   glp_prev=np.zeros(n_params), t=0)


@dataclass(frozen=True)
class EmphaticOutputs:
    m1: float
    m2: np.ndarray
    z_now: np.ndarray
    z_prev: np.ndarray


def geoffpac_trace_step(state, *, rho, c_now, v_now, delta, glp_now,
                        glp_now_at_prev_params, gamma, gamma_hat, lam1, lam2,
                        interest=1.0):
    """One step of the full emphatic-weight recursion.

    F1 accumulates ratio-weighted interest discounted by gamma; M1 blends the
    instantaneous term with F1 via lam1.  The interest-gradient term I uses the
    PREVIOUS step's cached ratio value and score, feeding F2/M2 (discounted by
    gamma_hat, blended via lam2).  Z combines both emphatic weights:

        Z = gamma_hat * interest * V * M2  +  rho * M1 * delta * grad log pi

    evaluated at the current parameters (z_now) and, for the recursive-momentum
    correction, with the score taken at the previous parameters (z_prev).
    """
    _check_finite(rho=rho, c_now=c_now, v_now=v_now, delta=delta,
                  glp_now=glp_now, glp_now_at_prev_params=glp_now_at_prev_params)
    if not (0.0 <= lam1 <= 1.0 and 0.0 <= lam2 <= 1.0):
        raise ValueError(f"lambda weights must be in [0, 1], got {lam1}, {lam2}")

    f1 = gamma * state.rho_prev * state.f1 + interest * c_now
    m1 = (1.0 - lam1) * interest * c_now + lam1 * f1
    i_grad = state.c_prev * state.rho_prev * state.glp_prev
    f2 = gamma_hat * state.rho_prev * state.f2 + i_grad
    m2 = (1.0 - lam2) * i_grad + lam2 * f2

    scale = rho * m1 * delta
    z_now = scale * glp_now
    z_prev = scale * glp_now_at_prev_params
    if gamma_hat != 0.0:
        bias = (gamma_hat * interest * v_now) * m2
        z_now = z_now + bias
        z_prev = z_prev + bias

    new_state = GeoffTraceState(f1=f1, f2=f2, rho_prev=rho, c_prev=c_now,
                                glp_prev=glp_now, t=state.t + 1)
    return new_state, EmphaticOutputs(m1=m1, m2=m2, z_now=z_now, z_prev=z_prev)


@dataclass(frozen=True)
class AceTraceState:
    f1: float
    rho_prev: float
    t: int

    @classmethod
    def initial(cls):
        return cls(f1=0.0, rho_prev=1.0, t=0)


def ace_trace_step(state, *, rho, delta, glp_now, glp_at_prev_params, gamma,
                   lam1, interest=1.0):
    """Interest-only emphatic recursion (no ratio reweighting, no F2 term)."""
    _check_finite(rho=rho, delta=delta, glp_now=glp_now,
                  glp_at_prev_params=glp_at_prev_params)
    if not 0.0 <= lam1 <= 1.0:
        raise ValueError(f"lam1 must be in [0, 1], got {lam1}")

    f1 = gamma * state.rho_prev * state.f1 + interest
    m1 = (1.0 - lam1) * interest + lam1 * f1
    scale = rho * m1 * delta
    z_now = scale * glp_now
    z_prev = scale * glp_at_prev_params

    new_state = AceTraceState(f1=f1, rho_prev=rho, t=state.t + 1)
    return new_state, EmphaticOutputs(m1=m1, m2=None, z_now=z_now, z_prev=z_prev)
