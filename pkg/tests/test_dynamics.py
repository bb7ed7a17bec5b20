import numpy as np
import pytest

from porl.density import Density
from porl.dynamics import (DynamicsConfig, ftrl_cumulative_step, ftrl_step,
                           md_step, mwu_step, run_dynamics,
                           theorem_step_bound, trajectory_rows,
                           write_trajectory_csv)
from porl.errors import ConfigError
from porl.games import (MatrixGame, matching_pennies, random_zero_sum)
from porl.equilibrium import qre_solve


def uniform_joint(game):
    return (Density.uniform(game.support_1), Density.uniform(game.support_2))


def random_joint(game, rng):
    return (
        Density.from_values(game.support_1,
                            rng.uniform(0.05, 1.0, game.shape[0])),
        Density.from_values(game.support_2,
                            rng.uniform(0.05, 1.0, game.shape[1])),
    )


def test_md_step_single_agent_softmax():
    game = MatrixGame.single_agent([1.0, 0.0])
    nxt = md_step(uniform_joint(game), game, eta=1.0, alpha=0.0)
    np.testing.assert_allclose(
        nxt[0].values, [0.7310585786300049, 0.2689414213699951], atol=1e-12)


def test_md_step_qre_is_fixed_point():
    game = random_zero_sum(3, 3, seed=21)
    sol = qre_solve(game, alpha=0.3, tol=1e-12)
    nxt = md_step(sol.policy, game, eta=0.8, alpha=0.3)
    for a, b in zip(nxt, sol.policy):
        assert np.abs(a.values - b.values).max() <= 1e-10


def test_md_step_uniform_fixed_on_matching_pennies():
    game = matching_pennies()
    for eta, alpha in ((0.1, 0.0), (1.0, 0.3), (5.0, 1.0)):
        nxt = md_step(uniform_joint(game), game, eta, alpha)
        np.testing.assert_allclose(nxt[0].values, 0.5, atol=1e-14)
        np.testing.assert_allclose(nxt[1].values, 0.5, atol=1e-14)


def test_md_step_shift_invariance():
    rng = np.random.default_rng(22)
    base = rng.uniform(-1, 1, (4, 4))
    g1 = MatrixGame.zero_sum_from_payoff(base)
    g2 = MatrixGame.general_sum(base + 3.7, -(base) + 3.7)
    pi = random_joint(g1, rng)
    a = md_step(pi, g1, eta=0.7, alpha=0.2)
    b = md_step(pi, g2, eta=0.7, alpha=0.2)
    for x, y in zip(a, b):
        assert np.abs(x.values - y.values).max() <= 1e-12


def test_ftrl_step_alpha_zero_equals_md():
    rng = np.random.default_rng(23)
    for _ in range(25):
        game = MatrixGame.zero_sum_from_payoff(rng.uniform(-1, 1, (5, 5)))
        pi = random_joint(game, rng)
        a = ftrl_step(pi, game, eta=0.4, alpha=0.0)
        b = md_step(pi, game, eta=0.4, alpha=0.0)
        for x, y in zip(a, b):
            assert np.abs(x.values - y.values).max() <= 1e-14


def test_ftrl_step_single_agent_softmax():
    game = MatrixGame.single_agent([1.0, 0.0])
    nxt = ftrl_step(uniform_joint(game), game, eta=1.0, alpha=0.0)
    np.testing.assert_allclose(
        nxt[0].values, [0.7310585786300049, 0.2689414213699951], atol=1e-12)


def test_ftrl_step_rejects_eta_alpha_over_one():
    game = matching_pennies()
    with pytest.raises(ConfigError):
        ftrl_step(uniform_joint(game), game, eta=4.0, alpha=0.3)


def test_eta_rescaling_equivalence():
    # ftrl with eta' = eta/(eta*alpha+1) reproduces the proximal step
    rng = np.random.default_rng(24)
    for _ in range(100):
        game = MatrixGame.zero_sum_from_payoff(rng.uniform(-1, 1, (4, 4)))
        pi = random_joint(game, rng)
        eta = rng.uniform(0.05, 3.0)
        alpha = rng.uniform(0.0, 1.0)
        eta_prime = eta / (eta * alpha + 1.0)
        a = ftrl_step(pi, game, eta_prime, alpha)
        b = md_step(pi, game, eta, alpha)
        for x, y in zip(a, b):
            assert np.abs(x.values - y.values).max() <= 1e-12


def test_mwu_matches_md_and_ftrl_at_alpha_zero():
    rng = np.random.default_rng(25)
    game = MatrixGame.zero_sum_from_payoff(rng.uniform(-1, 1, (5, 5)))
    pi = random_joint(game, rng)
    for _ in range(100):
        nxt = mwu_step(pi, game, eta=0.3)
        for variant in (md_step(pi, game, 0.3, 0.0),
                        ftrl_step(pi, game, 0.3, 0.0)):
            for x, y in zip(variant, nxt):
                assert np.abs(x.values - y.values).max() <= 1e-14
        pi = nxt


def test_cumulative_empty_history_is_uniform():
    game = matching_pennies()
    pi = ftrl_cumulative_step([], uniform_joint(game), eta=0.5, alpha=0.0)
    np.testing.assert_allclose(pi[0].values, 0.5, atol=1e-14)


def test_cumulative_single_entry_softmax():
    game = MatrixGame.single_agent([1.0, 0.0])
    history = [(np.array([1.0, 0.0]), np.array([0.0]))]
    pi = ftrl_cumulative_step(history, uniform_joint(game), eta=1.0, alpha=0.0)
    np.testing.assert_allclose(
        pi[0].values, [0.7310585786300049, 0.2689414213699951], atol=1e-12)


def test_cumulative_matches_iterated_mwu_fixed_opponent():
    # against a fixed opponent the payoff vector repeats, and the batch
    # solve from uniform equals iterating multiplicative weights
    game = MatrixGame.single_agent([0.9, -0.2, 0.4])
    eta = 0.3
    pi_inc = uniform_joint(game)
    history = []
    for t in range(30):
        nu = (np.array([0.9, -0.2, 0.4]), np.array([0.0]))
        history.append(nu)
        pi_inc = mwu_step(pi_inc, game, eta)
        pi_cum = ftrl_cumulative_step(history, uniform_joint(game), eta, 0.0)
        assert np.abs(pi_inc[0].values - pi_cum[0].values).max() <= 1e-10


def test_cumulative_rejects_positive_alpha():
    game = matching_pennies()
    with pytest.raises(ConfigError):
        ftrl_cumulative_step([], uniform_joint(game), eta=0.5, alpha=0.1)


def test_rule_mwu_forces_alpha_zero():
    with pytest.raises(ConfigError):
        DynamicsConfig(eta=0.1, alpha=0.2, rule="mwu", iterations=10)


def test_steps_preserve_simplex_and_positivity():
    rng = np.random.default_rng(26)
    game = random_zero_sum(6, 4, seed=3)
    pi = random_joint(game, rng)
    for _ in range(200):
        pi = md_step(pi, game, eta=1.5, alpha=0.05)
    for d in pi:
        mass = (d.values * d.support.measures).sum()
        assert abs(mass - 1.0) <= 1e-10
        assert np.all(np.isfinite(d.log_values))


def test_run_dynamics_zero_iterations_single_point():
    game = matching_pennies()
    cfg = DynamicsConfig(eta=0.1, alpha=0.2, rule="md", iterations=0)
    traj = run_dynamics(game, cfg)
    assert len(traj.points) == 1 and traj.points[0].t == 0


def test_run_dynamics_contraction_matching_pennies():
    game = matching_pennies()
    alpha, eta = 0.2, 0.05
    sol = qre_solve(game, alpha)
    s = game.support_1
    start = (Density.from_values(s, [0.6, 0.4]),
             Density.from_values(s, [0.58, 0.42]))
    cfg = DynamicsConfig(eta=eta, alpha=alpha, rule="md", iterations=400,
                         record_every=1)
    traj = run_dynamics(game, cfg, reference=sol.policy, initial=start)
    assert eta <= traj.eta_bound  # Theorem step condition verified post hoc
    kls = traj.column("kl_ref")
    rate = 1.0 / (1.0 + eta * alpha)
    assert np.all(kls[1:] <= kls[:-1] * rate + 1e-9)


def test_run_dynamics_mwu_cycles():
    game = matching_pennies()
    s = game.support_1
    start = (Density.from_values(s, [0.6, 0.4]),
             Density.from_values(s, [0.6, 0.4]))
    uniform_ref = (Density.uniform(s), Density.uniform(s))
    cfg = DynamicsConfig(eta=0.1, alpha=0.0, rule="mwu", iterations=5000,
                         record_every=100)
    traj = run_dynamics(game, cfg, reference=uniform_ref, initial=start)
    kls = traj.column("kl_ref")
    assert kls[-1] >= 0.5 * kls[0]


def test_run_dynamics_alpha_schedule_floor():
    # decay every step: alpha bottoms out at floor_fraction * alpha0
    game = matching_pennies()
    cfg = DynamicsConfig(eta=0.05, alpha=0.2, rule="md", iterations=50,
                         alpha_decay=0.5, alpha_floor_fraction=0.25,
                         decay_interval=1, record_every=50)
    traj = run_dynamics(game, cfg)
    assert traj.points[-1].t == 50  # schedule exercised without error


def test_trajectory_csv_round_trip(tmp_path):
    game = matching_pennies()
    cfg = DynamicsConfig(eta=0.1, alpha=0.2, rule="md", iterations=20,
                         record_every=5, init_jitter=0.3, seed=7)
    sol = qre_solve(game, 0.2)
    traj = run_dynamics(game, cfg, reference=sol.policy)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    from porl.harness import load_trajectory_csv
    table = load_trajectory_csv(path)
    np.testing.assert_array_equal(table["t"], traj.column("t"))
    np.testing.assert_array_equal(table["kl_ref"], traj.column("kl_ref"))
    assert len(trajectory_rows(traj)) == len(traj.points) + 1


def test_theorem_step_bound_formula():
    assert theorem_step_bound(b=2.0, alpha=0.5, r_max=1.0) == pytest.approx(
        min(0.25, 0.25 / 4.0))
    assert theorem_step_bound(b=0.5, alpha=1.0, r_max=2.0, gamma=0.5) == \
        pytest.approx(min(4.0, 1.0 / (0.25 * 256.0)))
