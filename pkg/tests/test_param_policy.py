import math

import numpy as np
import pytest

from porl.density import Support, kl
from porl.equilibrium import soft_optimal
from porl.errors import ConfigError, DomainError
from porl.param_policy import (ParamTrainConfig, SquashedGaussian,
                               discretize_policy, log_prob,
                               log_prob_pre_tanh, policy_objective,
                               policy_objective_grad, sample, train)


def quad_q(center=0.3, scale=1.0):
    return (lambda a: -scale * ((a - center) ** 2).sum(axis=-1),
            lambda a: -2.0 * scale * (a - center))


def fd_gradient(theta, pi_prev, q_fn, eta, alpha, noise, h=1e-5, **kw):
    g_mu = np.zeros(theta.action_dim)
    g_ls = np.zeros(theta.action_dim)
    for i in range(theta.action_dim):
        for which, out in (("mu", g_mu), ("ls", g_ls)):
            def at(eps):
                mu = theta.mu.copy()
                ls = theta.log_sigma.copy()
                (mu if which == "mu" else ls)[i] += eps
                return policy_objective(SquashedGaussian(mu, ls), pi_prev,
                                        q_fn, eta, alpha, noise, **kw)
            out[i] = (at(h) - at(-h)) / (2 * h)
    return g_mu, g_ls


def test_sample_zero_noise_is_tanh_mu():
    pol = SquashedGaussian([0.4, -1.2], [0.0, 0.0])
    np.testing.assert_allclose(sample(pol, np.zeros(2)), np.tanh([0.4, -1.2]))


def test_sample_unit_case():
    pol = SquashedGaussian([0.0], [0.0])
    assert sample(pol, np.array([1.0]))[0] == pytest.approx(
        0.7615941559557649, abs=1e-12)


def test_sample_antisymmetry():
    pol = SquashedGaussian([0.0, 0.0], [0.3, -0.2])
    rng = np.random.default_rng(0)
    eps = rng.standard_normal(2)
    np.testing.assert_allclose(sample(pol, eps), -sample(pol, -eps), atol=1e-15)


def test_sample_stays_inside_box():
    pol = SquashedGaussian([2.0], [1.0])
    rng = np.random.default_rng(1)
    a = sample(pol, rng.standard_normal((1000, 1)))
    assert np.all(np.abs(a) < 1.0)


def test_log_prob_standard_normal_at_zero():
    pol = SquashedGaussian([0.0], [0.0])
    assert log_prob(pol, np.array([0.0])) == pytest.approx(
        -0.5 * math.log(2 * math.pi), abs=1e-12)


def test_log_prob_symmetry_at_zero_mean():
    pol = SquashedGaussian([0.0], [0.4])
    for a in (0.3, 0.72, 0.95):
        assert log_prob(pol, np.array([a])) == pytest.approx(
            log_prob(pol, np.array([-a])), abs=1e-12)


def test_log_prob_rejects_edge_actions():
    pol = SquashedGaussian([0.0], [0.0])
    with pytest.raises(DomainError):
        log_prob(pol, np.array([1.0]))
    with pytest.raises(DomainError):
        log_prob(pol, np.array([-(1.0 - 1e-12)]))


def test_log_prob_integrates_to_one_1d():
    pol = SquashedGaussian([0.3], [np.log(0.7)])
    n = 100000
    centers = -1.0 + 2.0 * (np.arange(n) + 0.5) / n
    dens = np.exp(log_prob_pre_tanh(pol, np.arctanh(centers)[:, None]))
    assert (dens * (2.0 / n)).sum() == pytest.approx(1.0, abs=1e-4)


def test_log_prob_integrates_to_one_2d():
    # wide sigma makes the squashed density steep near the box edge, so the
    # midpoint rule needs a fine grid to reach 1e-4
    pol = SquashedGaussian([0.2, -0.5], [np.log(0.6), np.log(0.9)])
    n = 2000
    axis = -1.0 + 2.0 * (np.arange(n) + 0.5) / n
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    u = np.arctanh(np.stack([xx.ravel(), yy.ravel()], axis=1))
    dens = np.exp(log_prob_pre_tanh(pol, u))
    assert (dens * (2.0 / n) ** 2).sum() == pytest.approx(1.0, abs=1e-4)


def test_squash_correction_stable_for_large_pre_tanh():
    # naive log(1 - tanh(u)^2) underflows to -inf near u ~ 20
    pol = SquashedGaussian([0.0], [0.0])
    lp = log_prob_pre_tanh(pol, np.array([[30.0]]))
    assert np.isfinite(lp[0])


def test_objective_at_prev_policy_constant_q():
    pol = SquashedGaussian([0.2], [np.log(0.8)])
    noise = np.random.default_rng(2).standard_normal((4096, 1))
    j = policy_objective(pol, pol, lambda a: np.full(a.shape[0], 2.5),
                         eta=5.0, alpha=0.0, noise_batch=noise)
    assert j == pytest.approx(-2.5, abs=1e-12)


def test_objective_variant_equal_at_prev_policy():
    pol = SquashedGaussian([0.1], [np.log(0.5)])
    q_fn, _ = quad_q()
    noise = np.random.default_rng(3).standard_normal((512, 1))
    main = policy_objective(pol, pol, q_fn, 10.0, 0.1, noise)
    lagged = policy_objective(pol, pol, q_fn, 10.0, 0.1, noise,
                              alpha_on_previous=True)
    assert main == pytest.approx(lagged, abs=1e-14)


def test_objective_decreases_after_gradient_step():
    q_fn, q_grad = quad_q(center=0.0)
    theta = SquashedGaussian([0.8], [0.1])
    prev = SquashedGaussian([0.8], [0.1])
    noise = np.random.default_rng(4).standard_normal((1024, 1))
    j0 = policy_objective(theta, prev, q_fn, 10.0, 0.1, noise)
    g_mu, g_ls = policy_objective_grad(theta, prev, q_fn, q_grad, 10.0, 0.1,
                                       noise)
    stepped = SquashedGaussian(theta.mu - 0.05 * g_mu,
                               theta.log_sigma - 0.05 * g_ls)
    assert policy_objective(stepped, prev, q_fn, 10.0, 0.1, noise) < j0


def test_gradient_matches_finite_differences_1d():
    rng = np.random.default_rng(5)
    q_fn, q_grad = quad_q()
    worst = 0.0
    for _ in range(10):
        theta = SquashedGaussian(rng.uniform(-1, 1, 1), rng.uniform(-1, 0.5, 1))
        prev = SquashedGaussian(rng.uniform(-1, 1, 1), rng.uniform(-1, 0.5, 1))
        noise = rng.standard_normal((1024, 1))
        an = policy_objective_grad(theta, prev, q_fn, q_grad, 10.0, 0.1, noise)
        fd = fd_gradient(theta, prev, q_fn, 10.0, 0.1, noise)
        for a, f in zip(an, fd):
            worst = max(worst, np.max(np.abs(a - f) / np.maximum(1.0, np.abs(f))))
    assert worst <= 1e-5


def test_gradient_matches_finite_differences_3d_and_variant():
    rng = np.random.default_rng(6)
    lin = rng.uniform(-0.5, 0.5, 3)
    q_fn = lambda a: (-((a - 0.2) ** 2) + lin * a).sum(axis=-1)
    q_grad = lambda a: -2.0 * (a - 0.2) + lin
    for variant in (False, True):
        theta = SquashedGaussian(rng.uniform(-1, 1, 3), rng.uniform(-1, 0.5, 3))
        prev = SquashedGaussian(rng.uniform(-1, 1, 3), rng.uniform(-1, 0.5, 3))
        noise = rng.standard_normal((2048, 3))
        an = policy_objective_grad(theta, prev, q_fn, q_grad, 5.0, 0.2, noise,
                                   alpha_on_previous=variant)
        fd = fd_gradient(theta, prev, q_fn, 5.0, 0.2, noise,
                         alpha_on_previous=variant)
        for a, f in zip(an, fd):
            assert np.max(np.abs(a - f) / np.maximum(1.0, np.abs(f))) <= 1e-4


def test_gradient_eta_inf_drops_proximal_term():
    # with alpha = 0 and eta = inf only the pathwise q term remains
    rng = np.random.default_rng(7)
    q_fn, q_grad = quad_q()
    theta = SquashedGaussian([0.3], [-0.5])
    prev = SquashedGaussian([-0.4], [0.2])
    noise = rng.standard_normal((256, 1))
    g_mu, g_ls = policy_objective_grad(theta, prev, q_fn, q_grad,
                                       math.inf, 0.0, noise)
    u = theta.mu + theta.sigma * noise
    a = np.tanh(u)
    expected_mu = (-q_grad(a) * (1 - a * a)).mean(axis=0)
    expected_ls = (-q_grad(a) * (1 - a * a) * theta.sigma * noise).mean(axis=0)
    np.testing.assert_allclose(g_mu, expected_mu, atol=1e-14)
    np.testing.assert_allclose(g_ls, expected_ls, atol=1e-14)


def test_self_consistent_fixed_point_has_small_gradient():
    # iterate the proximal argmin on one large frozen batch; at the rest
    # point the whole gradient vanishes and the policy sits near the
    # discretized closed-form solution
    q_fn, q_grad = quad_q()
    eta, alpha = 10.0, 0.1
    noise = np.random.default_rng(8).standard_normal((16384, 1))
    theta = SquashedGaussian([0.0], [0.0])
    for _ in range(200):
        prev = theta
        for _ in range(200):
            g_mu, g_ls = policy_objective_grad(theta, prev, q_fn, q_grad,
                                               eta, alpha, noise)
            theta = SquashedGaussian(theta.mu - 0.05 * g_mu,
                                     theta.log_sigma - 0.05 * g_ls)
        if max(np.abs(theta.mu - prev.mu).max(),
               np.abs(theta.log_sigma - prev.log_sigma).max()) < 1e-10:
            break
    g_mu, g_ls = policy_objective_grad(theta, theta, q_fn, q_grad, eta,
                                       alpha, noise)
    assert np.hypot(np.abs(g_mu).max(), np.abs(g_ls).max()) <= 1e-3
    support = Support.box([(-1.0, 1.0)], 512)
    ref = soft_optimal(q_fn(support.centers), alpha, support)
    assert kl(ref, discretize_policy(theta, 512)) <= 0.1


def test_gradient_direction_invariant_under_objective_scaling():
    # the loss is defined up to a positive factor; any rescaling scales the
    # gradient without turning it, so the argmin is unaffected
    rng = np.random.default_rng(11)
    q_fn, q_grad = quad_q()
    theta = SquashedGaussian(rng.uniform(-1, 1, 2), rng.uniform(-1, 0.5, 2))
    prev = SquashedGaussian(rng.uniform(-1, 1, 2), rng.uniform(-1, 0.5, 2))
    noise = rng.standard_normal((512, 2))
    g_mu, g_ls = policy_objective_grad(theta, prev, q_fn, q_grad, 10.0, 0.1,
                                       noise)
    g = np.concatenate([g_mu, g_ls])
    for scale in (0.3, 2.0, 17.5):
        fd = np.zeros_like(g)
        h = 1e-6
        for i in range(4):
            def at(eps, i=i):
                mu = theta.mu.copy()
                ls = theta.log_sigma.copy()
                (mu if i < 2 else ls)[i % 2] += eps
                return scale * policy_objective(SquashedGaussian(mu, ls),
                                                prev, q_fn, 10.0, 0.1, noise)
            fd[i] = (at(h) - at(-h)) / (2 * h)
        np.testing.assert_allclose(fd / np.linalg.norm(fd),
                                   g / np.linalg.norm(g), atol=1e-6)


def test_training_deterministic_given_seed():
    q_fn, q_grad = quad_q()
    cfg = ParamTrainConfig(eta=10.0, alpha=0.1, gradient_steps=200,
                           refresh_every=50, batch_size=64,
                           learning_rate=0.02, seed=9)
    a = train(q_fn, q_grad, cfg)
    b = train(q_fn, q_grad, cfg)
    np.testing.assert_array_equal(a.mu, b.mu)
    np.testing.assert_array_equal(a.log_sigma, b.log_sigma)


def test_training_moves_mean_toward_well():
    q_fn, q_grad = quad_q(center=0.3)
    cfg = ParamTrainConfig(eta=10.0, alpha=0.1, gradient_steps=2000,
                           refresh_every=100, batch_size=256,
                           learning_rate=0.02, seed=10)
    theta = train(q_fn, q_grad, cfg)
    assert abs(np.tanh(theta.mu[0]) - 0.3) < 0.1


def test_discretize_policy_requires_1d():
    with pytest.raises(ConfigError):
        discretize_policy(SquashedGaussian([0.0, 0.0], [0.0, 0.0]))


def test_config_validation():
    with pytest.raises(ConfigError):
        ParamTrainConfig(eta=0.0, alpha=0.1)
    with pytest.raises(ConfigError):
        ParamTrainConfig(eta=1.0, alpha=0.1, learning_rate=0.0)


def test_json_round_trip():
    pol = SquashedGaussian([0.25, -1.0], [0.1, -0.3])
    back = SquashedGaussian.from_json(pol.to_json())
    np.testing.assert_array_equal(back.mu, pol.mu)
    np.testing.assert_array_equal(back.log_sigma, pol.log_sigma)
