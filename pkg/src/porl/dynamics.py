"""Closed-form policy update rules and last-iterate trajectory runner.

Three update rules over log-densities, all computed in log-space with
measure-weighted log-sum-exp normalization:

* mirror-descent proximal step, whose Euler-Lagrange closed form is
  ``log pi' = (eta * nu + log pi) / (eta * alpha + 1)`` up to normalization;
* the incremental regularized-leader step
  ``log pi' = (1 - eta * alpha) * log pi + eta * nu``;
* textbook multiplicative weights (the ``alpha = 0`` special case of both),
  kept as a separate direct-space implementation for cross-checking.

``run_dynamics`` iterates a rule with simultaneous updates for both
players and records KL-to-reference, exploitability, entropies and value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import Density, JointPolicy, joint_kl, entropy
from .equilibrium import exploitability
from .errors import ConfigError
from .games import MatrixGame, expected_payoff, marginal_q

RULES = ("md", "ftrl", "ftrl_cumulative", "mwu")


@dataclass(frozen=True)
class DynamicsConfig:
    eta: float
    alpha: float
    rule: str = "md"
    iterations: int = 1000
    alpha_decay: float = 1.0
    alpha_floor_fraction: float = 0.1
    decay_interval: int = 1
    record_every: int = 1
    seed: int = 0
    init_jitter: float = 0.0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if self.rule == "mwu" and self.alpha != 0.0:
            raise ConfigError("rule 'mwu' forces alpha = 0")
        if self.rule == "ftrl_cumulative" and self.alpha != 0.0:
            raise ConfigError("rule 'ftrl_cumulative' supports alpha = 0 only")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not 0 < self.alpha_decay <= 1:
            raise ConfigError("alpha_decay must lie in (0, 1]")
        if not 0 < self.alpha_floor_fraction <= 1:
            raise ConfigError("alpha_floor_fraction must lie in (0, 1]")
        if self.decay_interval < 1 or self.record_every < 1:
            raise ConfigError("decay_interval and record_every must be positive")


@dataclass(frozen=True)
class TrajectoryPoint:
    t: int
    kl_ref: float
    exploitability: float
    entropy_1: float
    entropy_2: float
    value: float


@dataclass(frozen=True)
class Trajectory:
    # final_policy is a JointPolicy for matrix-game runs, a per-state dict
    # for tabular runs, a 1-tuple of the discretized density for param runs
    points: tuple[TrajectoryPoint, ...]
    final_policy: object
    b_observed: float
    eta_bound: float
    warnings: tuple[str, ...] = ()

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


CSV_HEADER = "t,kl_ref,exploitability,entropy_p1,entropy_p2,value"


def trajectory_rows(traj: Trajectory) -> list[str]:
    rows = [CSV_HEADER]
    for p in traj.points:
        rows.append(f"{p.t},{p.kl_ref!r},{p.exploitability!r},"
                    f"{p.entropy_1!r},{p.entropy_2!r},{p.value!r}")
    return rows


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(trajectory_rows(traj)) + "\n")


def _marginals(game: MatrixGame, pi: JointPolicy) -> tuple[np.ndarray, np.ndarray]:
    nu1 = marginal_q(game, 1, pi[1])
    nu2 = marginal_q(game, 2, pi[0])
    for nu in (nu1, nu2):
        if not np.all(np.isfinite(nu)):
            raise ValueError("non-finite expected payoff vector")
    return nu1, nu2


def md_step(pi_t: JointPolicy, game: MatrixGame, eta: float,
            alpha: float) -> JointPolicy:
    """Proximal mirror-descent update with entropy temperature alpha.

    Per player: log pi' ∝ (eta * nu + log pi) / (eta * alpha + 1) with nu the
    expected payoff against the opponent's current density.  Both players
    update simultaneously; each maximizes its own payoff.
    """
    nus = _marginals(game, pi_t)
    denom = eta * alpha + 1.0
    return tuple(
        Density.from_logits(p.support, (eta * nu + p.log_values) / denom)
        for p, nu in zip(pi_t, nus)
    )


def ftrl_step(pi_t: JointPolicy, game: MatrixGame, eta: float,
              alpha: float) -> JointPolicy:
    """Incremental regularized-leader update: pi' ∝ pi * exp(eta*(nu - alpha*log pi)).

    Equivalent to ``md_step`` after rescaling eta by 1/(eta*alpha + 1);
    requires eta * alpha < 1 so the previous policy keeps positive weight.
    """
    if eta * alpha >= 1.0:
        raise ConfigError("ftrl step requires eta * alpha < 1")
    nus = _marginals(game, pi_t)
    return tuple(
        Density.from_logits(p.support, (1.0 - eta * alpha) * p.log_values + eta * nu)
        for p, nu in zip(pi_t, nus)
    )


def mwu_step(pi_t: JointPolicy, game: MatrixGame, eta: float) -> JointPolicy:
    """Textbook multiplicative weights in direct space: w ∝ w * exp(eta * nu)."""
    nus = _marginals(game, pi_t)
    out = []
    for p, nu in zip(pi_t, nus):
        w = p.values * np.exp(eta * nu - np.max(eta * nu))
        w /= (w * p.support.measures).sum()
        out.append(Density.from_values(p.support, w))
    return tuple(out)


def ftrl_cumulative_step(history: list[np.ndarray], pi_t: JointPolicy,
                         eta: float, alpha: float) -> JointPolicy:
    """Batch regularized-leader solve from the full payoff history, alpha = 0 only.

    ``history`` holds per-step pairs of expected-payoff vectors (one per
    player); the closed form is pi ∝ exp(eta * Σ_k nu_k) from a uniform
    prior, which matches iterated multiplicative weights.  The cumulative
    regularizer for alpha > 0 has no unambiguous closed form, so that case
    is rejected.
    """
    if alpha != 0.0:
        raise ConfigError("cumulative regularized-leader solve supports alpha = 0 only")
    out = []
    for player, p in enumerate(pi_t):
        total = np.zeros(p.support.n_cells)
        for nu_pair in history:
            total = total + np.asarray(nu_pair[player], dtype=float)
        out.append(Density.from_logits(p.support, eta * total))
    return tuple(out)


def theorem_step_bound(b: float, alpha: float, r_max: float,
                       gamma: float = 0.0) -> float:
    """Largest eta for which the geometric KL contraction is guaranteed:
    min(1/b^2, alpha^2 / (b^2 * L^4)) with L = r_max / (1 - gamma)."""
    ell = r_max / (1.0 - gamma)
    if b <= 0:
        return np.inf
    if ell == 0:
        return 1.0 / b ** 2
    return min(1.0 / b ** 2, alpha ** 2 / (b ** 2 * ell ** 4))


def initial_policy(game: MatrixGame, config: DynamicsConfig) -> JointPolicy:
    """Uniform start, optionally jittered in log-space by the config seed."""
    pols = []
    rng = np.random.default_rng(config.seed)
    for support in (game.support_1, game.support_2):
        logits = np.zeros(support.n_cells)
        if config.init_jitter > 0:
            logits = rng.uniform(-config.init_jitter, config.init_jitter,
                                 size=support.n_cells)
        pols.append(Density.from_logits(support, logits))
    return tuple(pols)


def run_dynamics(game: MatrixGame, config: DynamicsConfig,
                 reference: JointPolicy | None = None,
                 initial: JointPolicy | None = None) -> Trajectory:
    """Iterate the configured rule and record last-iterate metrics.

    The temperature follows alpha <- max(alpha_decay * alpha,
    alpha_floor_fraction * alpha_0) every ``decay_interval`` steps.  Metrics
    land every ``record_every`` steps (plus t=0 and the final step).
    Deterministic: the closed-form updates use no randomness.
    """
    pi = initial if initial is not None else initial_policy(game, config)
    alpha0 = config.alpha
    alpha = alpha0
    b_seen = max(p.max_value for p in pi)
    points = [_metrics_point(0, game, pi, reference)]
    history: list[tuple[np.ndarray, np.ndarray]] = []
    for t in range(1, config.iterations + 1):
        if config.rule == "md":
            pi = md_step(pi, game, config.eta, alpha)
        elif config.rule == "ftrl":
            pi = ftrl_step(pi, game, config.eta, alpha)
        elif config.rule == "mwu":
            pi = mwu_step(pi, game, config.eta)
        else:
            history.append(_marginals(game, pi))
            pi = ftrl_cumulative_step(history, pi, config.eta, alpha)
        b_seen = max(b_seen, *(p.max_value for p in pi))
        if t % config.decay_interval == 0:
            alpha = max(config.alpha_decay * alpha,
                        config.alpha_floor_fraction * alpha0)
        if t % config.record_every == 0 or t == config.iterations:
            points.append(_metrics_point(t, game, pi, reference))
    eta_bound = theorem_step_bound(b_seen, alpha0, game.r_max)
    warnings = ()
    if config.alpha > 0 and config.eta > eta_bound:
        warnings = (
            f"eta={config.eta} exceeds the contraction step bound "
            f"{eta_bound:.6g} measured with b={b_seen:.6g}",
        )
    return Trajectory(tuple(points), pi, b_seen, eta_bound, warnings)


def _metrics_point(t: int, game: MatrixGame, pi: JointPolicy,
                   reference: JointPolicy | None) -> TrajectoryPoint:
    kl_ref = joint_kl(reference, pi) if reference is not None else float("nan")
    return TrajectoryPoint(
        t=t,
        kl_ref=kl_ref,
        exploitability=exploitability(game, pi),
        entropy_1=entropy(pi[0]),
        entropy_2=entropy(pi[1]),
        value=expected_payoff(game, 1, pi[0], pi[1]),
    )
