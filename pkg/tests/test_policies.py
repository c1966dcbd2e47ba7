"""Policies, approximators, ratios, and parameter snapshots."""

import math

import numpy as np
import pytest

from vrpg.envs import two_circle
from vrpg.numkit import make_rng
from vrpg.policies import GaussianMlpPolicy, MlpRatioFn, MlpValueFn, \
    PinnedRatioFn, TabularRatioFn, TabularSoftmaxPolicy, TabularValueFn, \
    UniformBoxBehavior, UniformDiscreteBehavior, importance_ratio, \
    load_params, save_params


def test_softmax_policy_uniform_at_zero():
    policy = TabularSoftmaxPolicy([2, 1, 1, 1, 1])
    assert np.allclose(policy.probs(0), [0.5, 0.5])
    assert np.allclose(policy.probs(1), [1.0])
    assert policy.n_params == 6


def test_softmax_policy_ragged_blocks_independent():
    policy = TabularSoftmaxPolicy([2, 3])
    theta = np.array([1.0, -1.0, 0.0, 0.0, 5.0])
    policy.set_flat(theta)
    assert policy.probs(0)[0] == pytest.approx(1.0 / (1.0 + math.exp(-2.0)))
    assert policy.probs(1)[2] > 0.9


def test_softmax_log_prob_grad_finite_differences():
    policy = TabularSoftmaxPolicy([3, 2])
    rng = make_rng(0)
    policy.set_flat(rng.standard_normal(5))
    for s, a in ((0, 1), (1, 0)):
        g = policy.log_prob_grad(s, a)
        theta = policy.get_flat()
        eps = 1e-6
        fd = np.zeros_like(theta)
        for j in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[j] += eps
            dn[j] -= eps
            fd[j] = (policy.log_prob(s, a, flat=up)
                     - policy.log_prob(s, a, flat=dn)) / (2.0 * eps)
        assert np.max(np.abs(g - fd)) < 1e-4


def test_softmax_single_action_state_grad_zero():
    policy = TabularSoftmaxPolicy([2, 1])
    assert np.allclose(policy.log_prob_grad(1, 0), 0.0)
    assert policy.log_prob(1, 0) == 0.0


def test_softmax_sample_frequencies():
    policy = TabularSoftmaxPolicy([2])
    policy.set_flat(np.array([math.log(3.0), 0.0]))   # probs (0.75, 0.25)
    rng = make_rng(1)
    draws = np.array([policy.sample(0, rng) for _ in range(20000)])
    assert abs((draws == 0).mean() - 0.75) < 0.01


def test_gaussian_policy_log_prob_matches_density():
    rng = make_rng(2)
    policy = GaussianMlpPolicy(4, 1, rng, sigma=0.5)
    policy.set_flat(rng.standard_normal(policy.n_params) * 0.1)
    s = rng.standard_normal(4)
    a = np.array([0.3])
    m = policy.mean(s)
    expected = -0.5 * ((a[0] - m[0]) / 0.5) ** 2 \
        - math.log(0.5 * math.sqrt(2.0 * math.pi))
    assert policy.log_prob(s, a) == pytest.approx(expected, abs=1e-12)
    assert policy.density(s, a) == pytest.approx(math.exp(expected))


def test_gaussian_policy_sample_clamped():
    rng = make_rng(3)
    policy = GaussianMlpPolicy(4, 1, rng, sigma=5.0)
    draws = np.array([policy.sample(np.zeros(4), rng)[0] for _ in range(200)])
    assert np.all(draws >= -1.0) and np.all(draws <= 1.0)
    assert np.any(np.abs(draws) == 1.0)    # wide sigma actually hits the clamp


def test_gaussian_log_prob_grad_finite_differences():
    rng = make_rng(4)
    policy = GaussianMlpPolicy(3, 2, rng)
    policy.set_flat(rng.standard_normal(policy.n_params) * 0.2)
    s = rng.standard_normal(3)
    a = rng.uniform(-1.0, 1.0, size=2)
    g = policy.log_prob_grad(s, a)
    theta = policy.get_flat()
    eps = 1e-6
    fd = np.zeros_like(theta)
    for j in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[j] += eps
        dn[j] -= eps
        fd[j] = (policy.log_prob(s, a, flat=up)
                 - policy.log_prob(s, a, flat=dn)) / (2.0 * eps)
    scale = np.maximum(np.abs(fd), 1.0)
    assert np.max(np.abs(g - fd) / scale) < 1e-4


def test_gaussian_prev_params_evaluation_restores_state():
    rng = make_rng(5)
    policy = GaussianMlpPolicy(4, 1, rng)
    theta_now = rng.standard_normal(policy.n_params) * 0.1
    theta_old = rng.standard_normal(policy.n_params) * 0.1
    policy.set_flat(theta_now)
    s, a = rng.standard_normal(4), np.array([0.2])
    g_old = policy.log_prob_grad(s, a, flat=theta_old)
    assert np.array_equal(policy.get_flat(), theta_now)
    policy.set_flat(theta_old)
    assert np.array_equal(g_old, policy.log_prob_grad(s, a))


def test_importance_ratio_discrete():
    mdp = two_circle()
    policy = TabularSoftmaxPolicy(mdp.n_actions)
    mu = UniformDiscreteBehavior(mdp.n_actions)
    assert importance_ratio(policy, mu, 0, 0) == pytest.approx(1.0)
    assert importance_ratio(policy, mu, 1, 0) == pytest.approx(1.0)
    policy.set_flat(np.array([10.0, -10.0, 0, 0, 0, 0]))
    assert importance_ratio(policy, mu, 0, 0) == pytest.approx(2.0, abs=1e-6)


def test_importance_ratio_clipped():
    rng = make_rng(6)
    policy = GaussianMlpPolicy(4, 1, rng, sigma=0.05)
    mu = UniformBoxBehavior(1)
    s = np.zeros(4)
    a = policy.mean(s)                     # density at the mean >> 0.5
    assert importance_ratio(policy, mu, s, a, rho_max=10.0) == 10.0


def test_uniform_box_behavior_density():
    mu = UniformBoxBehavior(3)
    assert mu.density(None, np.zeros(3)) == pytest.approx(0.125)
    rng = make_rng(7)
    a = mu.sample(None, rng)
    assert a.shape == (3,) and np.all(np.abs(a) <= 1.0)


def test_value_fns_grad_and_update():
    v = TabularValueFn(4)
    v.update(0.5 * 2.0 * v.grad(2))
    assert v.value(2) == 1.0 and v.value(0) == 0.0

    rng = make_rng(8)
    mv = MlpValueFn(3, rng)
    s = rng.standard_normal(3)
    before = mv.value(s)
    mv.update(1e-3 * mv.grad(s))
    assert mv.value(s) > before            # stepping along the gradient raises V


def test_ratio_fns_start_at_one_and_stay_positive():
    t = TabularRatioFn(5)
    assert all(t.value(s) == pytest.approx(1.0) for s in range(5))
    t.update(-100.0 * np.ones(5))
    assert all(t.value(s) > 0.0 for s in range(5))

    m = MlpRatioFn(4, make_rng(9))
    assert m.value(np.zeros(4)) == pytest.approx(1.0)

    p = PinnedRatioFn()
    p.update(np.array([1.0]))
    assert p.value(0) == 1.0 and p.grad(0).size == 0


def test_tabular_ratio_grad_matches_finite_differences():
    t = TabularRatioFn(3)
    t.raw[:] = [0.3, -0.2, 1.1]
    for s in range(3):
        eps = 1e-6
        raw = t.raw.copy()
        t.raw[s] = raw[s] + eps
        up = t.value(s)
        t.raw[s] = raw[s] - eps
        dn = t.value(s)
        t.raw = raw
        assert t.grad(s)[s] == pytest.approx((up - dn) / (2 * eps), abs=1e-6)


def test_params_round_trip(tmp_path):
    rng = make_rng(10)
    arrays = {"policy": rng.standard_normal(17),
              "critic": rng.standard_normal((3, 2)),
              "scalar": np.array(4.5)}
    path = tmp_path / "snapshot.bin"
    save_params(path, arrays)
    loaded = load_params(path)
    assert set(loaded) == set(arrays)
    for name in arrays:
        assert np.array_equal(loaded[name], arrays[name])


def test_load_params_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a snapshot")
    with pytest.raises(ValueError):
        load_params(path)
