"""TD critic, ratio learner, and the recursive-momentum optimizer."""

import numpy as np
import pytest

from vrpg import oracle
from vrpg.envs import Transition, two_circle
from vrpg.learners import RatioLearner, StormState, TdCritic, storm_step
from vrpg.numkit import make_rng
from vrpg.policies import TabularRatioFn, TabularValueFn


def test_td_delta_terminal_step():
    critic = TdCritic(TabularValueFn(2), alpha=0.1)
    delta = critic.update(Transition(0, 0, 1.0, 1), gamma_t=0.0)
    assert delta == 1.0


def test_td_full_step_tabular_jump():
    critic = TdCritic(TabularValueFn(2), alpha=1.0)
    critic.update(Transition(0, 0, 3.0, 1), gamma_t=0.0)
    assert critic.value_fn.value(0) == 3.0


def test_td_semi_gradient_ignores_bootstrap_target():
    critic = TdCritic(TabularValueFn(2), alpha=1.0)
    critic.value_fn.table[:] = [0.0, 5.0]
    critic.update(Transition(0, 0, 1.0, 1), gamma_t=0.5)
    assert critic.value_fn.value(1) == 5.0     # target state untouched
    assert critic.value_fn.value(0) == 3.5


def test_td_converges_to_oracle_on_policy():
    # Sampling actions from the evaluated policy itself, the table reaches V_pi
    mdp = two_circle()
    pi_probs = [np.array([0.7, 0.3])] + [np.array([1.0])] * 4
    V_true = oracle.value_function(mdp, pi_probs)
    critic = TdCritic(TabularValueFn(5), alpha=0.05)
    rng = make_rng(0)
    s = 0
    for _ in range(10 ** 5):
        a = int(rng.choice(len(pi_probs[s]), p=pi_probs[s]))
        tr = mdp.step(s, a, rng)
        critic.update(tr, mdp.gamma)
        s = tr.s_next
    assert np.max(np.abs(critic.value_fn.table - V_true)) < 0.1


def test_ratio_fixed_point_at_gamma_hat_zero():
    learner = RatioLearner(TabularRatioFn(5), alpha=0.05, gamma_hat=0.0)
    mdp = two_circle()
    rng = make_rng(1)
    s = 0
    for _ in range(2000):
        a = int(rng.integers(mdp.n_actions[s]))
        tr = mdp.step(s, a, rng)
        learner.update(tr, rho=1.0)
        s = tr.s_next
    table = np.array([learner.ratio_fn.value(i) for i in range(5)])
    assert np.max(np.abs(table - 1.0)) < 0.05


def test_ratio_converges_to_oracle():
    mdp = two_circle()
    mu = oracle.uniform_policy(mdp)
    pi_probs = [np.array([0.8, 0.2])] + [np.array([1.0])] * 4
    C_true = oracle.exact_density_ratio(mdp, pi_probs, mu, 0.2)
    learner = RatioLearner(TabularRatioFn(5), alpha=0.05, gamma_hat=0.2)
    rng = make_rng(2)
    s = 0
    for _ in range(2 * 10 ** 5):
        a = int(rng.integers(mdp.n_actions[s]))
        rho = pi_probs[s][a] * mdp.n_actions[s]
        tr = mdp.step(s, a, rng)
        learner.update(tr, rho)
        s = tr.s_next
    table = np.array([learner.ratio_fn.value(i) for i in range(5)])
    assert np.max(np.abs(table - C_true)) < 0.1


def test_ratio_update_mean_zero_at_oracle_fixed_point():
    # Injecting the exact ratio table: the expected update direction vanishes
    mdp = two_circle()
    mu = oracle.uniform_policy(mdp)
    pi_probs = [np.array([0.8, 0.2])] + [np.array([1.0])] * 4
    C_true = oracle.exact_density_ratio(mdp, pi_probs, mu, 0.2)
    rng = make_rng(3)
    s = 0
    n = 10 ** 5
    sums = np.zeros(5)
    counts = np.zeros(5)
    sq = np.zeros(5)
    for _ in range(n):
        a = int(rng.integers(mdp.n_actions[s]))
        rho = pi_probs[s][a] * mdp.n_actions[s]
        tr = mdp.step(s, a, rng)
        err = 0.2 * rho * C_true[tr.s] + 0.8 - C_true[tr.s_next]
        sums[tr.s_next] += err
        sq[tr.s_next] += err ** 2
        counts[tr.s_next] += 1
        s = tr.s_next
    mean = sums / counts
    se = np.sqrt(np.maximum(sq / counts - mean ** 2, 1e-12) / counts)
    assert np.all(np.abs(mean) <= 4.0 * se + 1e-9)


def test_storm_first_step_is_plain_gradient():
    state = StormState(k=0.1, w=10.0, beta=100.0)
    g1 = np.array([1.0, -2.0])
    state, g, eta = storm_step(state, g1, np.zeros(2))
    assert np.array_equal(g, g1)
    assert eta == pytest.approx(0.1 / (10.0 + 5.0) ** (1.0 / 3.0))


def test_storm_stepsize_arithmetic():
    state = StormState(k=1.0, w=8.0, beta=100.0)
    g1 = np.full(19, 1.0)                  # squared norm 19
    _, _, eta = storm_step(state, g1, np.zeros(19))
    assert eta == pytest.approx(1.0 / 3.0)


def test_storm_momentum_recursion_hand_computed():
    state = StormState(k=0.1, w=10.0, beta=10.0)
    z1 = np.array([1.0])
    state, g, eta1 = storm_step(state, z1, z1)
    alpha2 = min(1.0, 10.0 * eta1 ** 2)
    z2_now, z2_prev = np.array([2.0]), np.array([1.5])
    state, g2, _ = storm_step(state, z2_now, z2_prev)
    expected = z2_now + (1.0 - alpha2) * (g - z2_prev)
    assert g2[0] == pytest.approx(expected[0], abs=1e-12)


def test_storm_forced_alpha_one_is_sgd():
    state = StormState(k=0.1, w=10.0, beta=100.0)
    rng = make_rng(4)
    for _ in range(10):
        z_now = rng.standard_normal(3)
        z_prev = rng.standard_normal(3)
        state, g, _ = storm_step(state, z_now, z_prev, force_alpha_one=True)
        assert np.array_equal(g, z_now)


def test_storm_stepsize_decreasing_and_sum_monotone():
    state = StormState(k=0.1, w=10.0, beta=100.0)
    rng = make_rng(5)
    last_eta = np.inf
    last_sum = -1.0
    for _ in range(50):
        z = rng.standard_normal(4)
        state, _, eta = storm_step(state, z, z)
        assert eta <= last_eta + 1e-15
        assert state.sum_g2 >= last_sum
        last_eta, last_sum = eta, state.sum_g2


def test_storm_rejects_non_finite():
    state = StormState(k=0.1, w=10.0, beta=100.0)
    with pytest.raises(FloatingPointError):
        storm_step(state, np.array([np.nan]), np.array([0.0]))


def test_stepsize_validation():
    with pytest.raises(ValueError):
        TdCritic(TabularValueFn(2), alpha=1.5)
    with pytest.raises(ValueError):
        RatioLearner(TabularRatioFn(2), alpha=0.1, gamma_hat=1.0)
