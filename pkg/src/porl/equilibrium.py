"""Reference solutions and evaluation: QRE, soft-optimal policies, exploitability.

The quantal response equilibrium at temperature ``alpha`` is the fixed
point where each player's density is a logit (softmax) response to the
opponent's expected payoffs.  It is the unique saddle point of the
entropy-regularized game objective, and the reference point for the
last-iterate convergence checks in :mod:`porl.dynamics`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import Density, JointPolicy, Support
from .errors import ConfigError, ConvergenceError
from .games import MatrixGame, expected_payoff, marginal_q


@dataclass(frozen=True)
class QreSolution:
    policy: JointPolicy
    residual: float
    alpha: float
    iterations_used: int


def soft_optimal(values: np.ndarray, alpha: float, support: Support) -> Density:
    """Boltzmann density ∝ exp(values / alpha), the entropy-regularized argmax.

    Maximizes ⟨g, values⟩ + alpha * H(g) over densities g on the support.
    """
    if alpha <= 0:
        raise ConfigError("soft_optimal requires alpha > 0")
    values = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    return Density.from_logits(support, values / alpha)


def logit_response(game: MatrixGame, player: int, opponent: Density,
                   alpha: float) -> Density:
    return soft_optimal(marginal_q(game, player, opponent), alpha,
                        game.support_of(player))


def qre_solve(game: MatrixGame, alpha: float, tol: float = 1e-10,
              max_iters: int = 10 ** 6, damping: float = 0.5) -> QreSolution:
    """Damped logit fixed-point iteration for the QRE at temperature alpha.

    Each pass mixes the current densities toward their logit responses with
    weight ``damping``; converged when the sup-norm residual between every
    policy and its response drops below ``tol``.
    """
    if alpha <= 0:
        raise ConfigError("qre_solve requires alpha > 0")
    if not 0 < damping <= 1:
        raise ConfigError("damping must lie in (0, 1]")
    pols = [Density.uniform(game.support_1), Density.uniform(game.support_2)]
    residual = np.inf
    damp = damping
    stall_probe = np.inf
    for it in range(1, max_iters + 1):
        responses = [logit_response(game, 1, pols[1], alpha),
                     logit_response(game, 2, pols[0], alpha)]
        residual = max(
            float(np.abs(p.values - r.values).max())
            for p, r in zip(pols, responses)
        )
        if residual <= tol:
            return QreSolution(tuple(pols), residual, alpha, it)
        # a period-2 oscillation leaves the residual flat; halve the mixing
        # weight when 100 iterations bring essentially no progress
        if it % 100 == 0:
            if residual > 0.98 * stall_probe:
                damp = max(damp / 2.0, 1e-3)
            stall_probe = residual
        pols = [
            Density.from_values(
                p.support, (1 - damp) * p.values + damp * r.values)
            for p, r in zip(pols, responses)
        ]
    raise ConvergenceError(
        f"QRE fixed point did not reach tol={tol} in {max_iters} iterations "
        f"(last residual {residual:.3e})", residual=residual)


def player_gains(game: MatrixGame, pi: JointPolicy) -> tuple[float, float]:
    """Best-response gain of each player against the other's current density."""
    p1, p2 = pi
    gains = []
    for player, own, other in ((1, p1, p2), (2, p2, p1)):
        nu = marginal_q(game, player, other)
        current = float((own.values * own.support.measures * nu).sum())
        # ties in the max broken by lowest cell index (np.argmax); the
        # gain itself is tie-independent
        gains.append(float(nu[int(np.argmax(nu))] - current))
    return gains[0], gains[1]


def exploitability(game: MatrixGame, pi: JointPolicy) -> float:
    """Sum over players of best-response gains (NashConv); 0 exactly at a NE.

    For zero-sum games this is the usual duality gap; for general-sum games
    it is the sum-of-gains convention.
    """
    g1, g2 = player_gains(game, pi)
    return g1 + g2


def best_response_density(game: MatrixGame, player: int, opponent: Density,
                          epsilon: float = 1e-12) -> Density:
    """Near-pure density on the best-response cell.

    Exact point masses would require zero-density cells, which the density
    representation rejects; ``epsilon`` mass is spread over the rest.
    """
    nu = marginal_q(game, player, opponent)
    support = game.support_of(player)
    values = np.full(support.n_cells, epsilon)
    values[int(np.argmax(nu))] = 1.0
    return Density.from_values(support, values)


def near_pure(support: Support, index: int, epsilon: float = 1e-12) -> Density:
    values = np.full(support.n_cells, epsilon)
    values[index] = 1.0
    return Density.from_values(support, values)


def cross_play(game: MatrixGame, policy_a: JointPolicy,
               policy_b: JointPolicy) -> np.ndarray:
    """Pairwise score table for two joint policies.

    S[x, y] is the total return collected by policy x's players when x's
    player 1 faces y's player 2 and y's player 1 faces x's player 2; exact
    expectations, no sampling.
    """
    pols = (policy_a, policy_b)
    table = np.empty((2, 2))
    for i, px in enumerate(pols):
        for j, py in enumerate(pols):
            table[i, j] = (expected_payoff(game, 1, px[0], py[1])
                           + expected_payoff(game, 2, py[0], px[1]))
    return table
