"""Payoff structures: matrix games, kernel games on boxes, tabular stochastic games.

``MatrixGame`` is the workhorse: two payoff tables indexed by (player-1
cell, player-2 cell) together with the two supports.  Discretizing a
``KernelGame`` produces a MatrixGame whose measure-weighted expectations
are midpoint quadrature of the kernel integrals.  Single-agent problems
are matrix games with a single trivial opponent cell, so no separate code
path exists downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .density import Density, Support, _frozen
from .errors import ConfigError, DomainError, ModelError, SupportMismatchError


@dataclass(frozen=True)
class MatrixGame:
    """Two-player game on finite supports.

    payoff_1[i, j] / payoff_2[i, j] are the players' utilities when player 1
    plays cell i and player 2 plays cell j.  Entries are kernel values at
    the cell centers for discretized games, raw utilities for discrete ones.
    """

    payoff_1: np.ndarray
    payoff_2: np.ndarray
    support_1: Support
    support_2: Support
    zero_sum: bool = True
    r_max: float | None = None

    def __post_init__(self):
        p1 = np.atleast_2d(np.asarray(self.payoff_1, dtype=float))
        p2 = np.atleast_2d(np.asarray(self.payoff_2, dtype=float))
        if p1.shape != p2.shape:
            raise ModelError("payoff tables must share a shape")
        if p1.shape != (self.support_1.n_cells, self.support_2.n_cells):
            raise ModelError("payoff shape must match the supports")
        if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
            raise ModelError("payoffs must be finite")
        if self.zero_sum and not np.array_equal(p2, -p1):
            raise ModelError("zero-sum game requires payoff_2 == -payoff_1")
        bound = float(max(np.abs(p1).max(), np.abs(p2).max()))
        r_max = bound if self.r_max is None else float(self.r_max)
        if bound > r_max + 1e-12:
            raise ModelError(f"payoffs exceed declared r_max={r_max}")
        object.__setattr__(self, "payoff_1", _frozen(p1))
        object.__setattr__(self, "payoff_2", _frozen(p2))
        object.__setattr__(self, "r_max", r_max)

    @property
    def shape(self) -> tuple[int, int]:
        return self.payoff_1.shape

    def support_of(self, player: int) -> Support:
        return self.support_1 if player == 1 else self.support_2

    def payoff_of(self, player: int) -> np.ndarray:
        return self.payoff_1 if player == 1 else self.payoff_2

    @staticmethod
    def zero_sum_from_payoff(payoff_1, support_1=None, support_2=None,
                             r_max=None) -> "MatrixGame":
        p1 = np.atleast_2d(np.asarray(payoff_1, dtype=float))
        d1, d2 = p1.shape
        return MatrixGame(
            p1, -p1,
            support_1 or Support.atoms(d1),
            support_2 or Support.atoms(d2),
            zero_sum=True, r_max=r_max,
        )

    @staticmethod
    def general_sum(payoff_1, payoff_2, support_1=None, support_2=None,
                    r_max=None) -> "MatrixGame":
        p1 = np.atleast_2d(np.asarray(payoff_1, dtype=float))
        d1, d2 = p1.shape
        return MatrixGame(
            p1, np.atleast_2d(np.asarray(payoff_2, dtype=float)),
            support_1 or Support.atoms(d1),
            support_2 or Support.atoms(d2),
            zero_sum=False, r_max=r_max,
        )

    @staticmethod
    def single_agent(values, support=None, r_max=None) -> "MatrixGame":
        """Bandit as a d x 1 game: the trivial opponent has one unit cell."""
        v = np.asarray(values, dtype=float).ravel()
        trivial = Support(np.zeros((1, 1)), np.ones(1))
        return MatrixGame(
            v.reshape(-1, 1), np.zeros((v.shape[0], 1)),
            support or Support.atoms(v.shape[0]), trivial,
            zero_sum=False, r_max=r_max,
        )


def marginal_q(game: MatrixGame, player: int, opponent: Density) -> np.ndarray:
    """Expected payoff of each own cell against the opponent density.

    nu_i(a) = Σ_cells opponent(a') · measure(a') · payoff_i(a, a').
    """
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    other = 2 if player == 1 else 1
    if not opponent.support.matches(game.support_of(other)):
        raise SupportMismatchError("opponent density is not on the opponent support")
    weights = opponent.values * opponent.support.measures
    if player == 1:
        return game.payoff_1 @ weights
    return game.payoff_2.T @ weights


def expected_payoff(game: MatrixGame, player: int, p1: Density, p2: Density) -> float:
    """Exact expected utility of ``player`` under the product policy (p1, p2)."""
    for d, s in ((p1, game.support_1), (p2, game.support_2)):
        if not d.support.matches(s):
            raise SupportMismatchError("policy support does not match the game")
    w1 = p1.values * p1.support.measures
    w2 = p2.values * p2.support.measures
    return float(w1 @ game.payoff_of(player) @ w2)


@dataclass(frozen=True)
class KernelGame:
    """Zero-sum game with a payoff kernel on a product of compact boxes."""

    kernel: Callable[[np.ndarray, np.ndarray], float]
    box_1: tuple[tuple[float, float], ...]
    box_2: tuple[tuple[float, float], ...]
    r_max: float
    name: str = "kernel"

    def discretize(self, resolution: int | list[int],
                   resolution_2: int | list[int] | None = None) -> MatrixGame:
        return discretize(self, resolution, resolution_2)


def discretize(kg: KernelGame, resolution, resolution_2=None) -> MatrixGame:
    """Midpoint-rule discretization of a kernel game.

    payoff_1[i][j] is the kernel at the cell centers; the returned supports
    carry the cell measures, so density-weighted sums approximate the
    kernel integrals with midpoint quadrature.
    """
    res1 = resolution
    res2 = resolution if resolution_2 is None else resolution_2
    for r, box in ((res1, kg.box_1), (res2, kg.box_2)):
        rs = [r] * len(box) if np.isscalar(r) else list(r)
        if any(x < 2 for x in rs):
            raise ConfigError("resolution must be >= 2 per axis")
    s1 = Support.box(list(kg.box_1), res1)
    s2 = Support.box(list(kg.box_2), res2)
    payoff = np.empty((s1.n_cells, s2.n_cells))
    for i, a1 in enumerate(s1.centers):
        for j, a2 in enumerate(s2.centers):
            payoff[i, j] = kg.kernel(a1, a2)
    if not np.all(np.isfinite(payoff)):
        raise DomainError(f"kernel '{kg.name}' evaluated to a non-finite value")
    if np.abs(payoff).max() > kg.r_max + 1e-9:
        raise ModelError("kernel exceeds its declared r_max on the grid")
    return MatrixGame(payoff, -payoff, s1, s2, zero_sum=True, r_max=kg.r_max)


def bilinear_kernel(dim: int = 1, scale: float = 1.0,
                    half_width: float = 1.0) -> KernelGame:
    """q(a1, a2) = scale * <a1, a2> on [-w, w]^dim x [-w, w]^dim."""
    box = tuple((-half_width, half_width) for _ in range(dim))
    return KernelGame(
        kernel=lambda a1, a2: scale * float(np.dot(a1, a2)),
        box_1=box, box_2=box,
        r_max=abs(scale) * dim * half_width ** 2,
        name="bilinear",
    )


def saddle_kernel(dim: int = 1, scale: float = 1.0, center_1: float = 0.0,
                  center_2: float = 0.0, half_width: float = 1.0) -> KernelGame:
    """q = scale * (||a2 - c2||^2 - ||a1 - c1||^2): interior pure saddle."""
    box = tuple((-half_width, half_width) for _ in range(dim))
    c1 = np.full(dim, float(center_1))
    c2 = np.full(dim, float(center_2))
    reach = max(abs(half_width - center_1), abs(half_width + center_1),
                abs(half_width - center_2), abs(half_width + center_2))
    return KernelGame(
        kernel=lambda a1, a2: scale * float(
            np.sum((a2 - c2) ** 2) - np.sum((a1 - c1) ** 2)),
        box_1=box, box_2=box,
        r_max=abs(scale) * dim * reach ** 2,
        name="saddle",
    )


def polynomial_kernel(terms: list[tuple[int, int, float]],
                      half_width: float = 1.0) -> KernelGame:
    """1-D kernel q(a1, a2) = Σ c * a1^p * a2^q from (p, q, c) triples."""
    terms = [(int(p), int(q), float(c)) for p, q, c in terms]
    box = ((-half_width, half_width),)
    bound = sum(abs(c) * half_width ** (p + q) for p, q, c in terms)

    def kern(a1, a2):
        x, y = float(a1[0]), float(a2[0])
        return sum(c * x ** p * y ** q for p, q, c in terms)

    return KernelGame(kernel=kern, box_1=box, box_2=box, r_max=bound,
                      name="polynomial")


@dataclass(frozen=True)
class TabularSG:
    """Zero-sum tabular stochastic game with discounted infinite horizon.

    transition[s, a1, a2, s'] is P(s'|s, a1, a2); rewards[s, a1, a2] is
    player 1's reward (player 2 receives the negation).  Terminal states
    absorb: their value contribution is the immediate reward only.
    """

    states: tuple[str, ...]
    n_actions: tuple[int, int]
    transition: np.ndarray
    rewards: np.ndarray
    gamma: float
    terminals: frozenset[str] = frozenset()

    def __post_init__(self):
        n_s = len(self.states)
        d1, d2 = self.n_actions
        trans = np.asarray(self.transition, dtype=float)
        rew = np.asarray(self.rewards, dtype=float)
        if trans.shape != (n_s, d1, d2, n_s):
            raise ModelError("transition table must have shape (S, d1, d2, S)")
        if rew.shape != (n_s, d1, d2):
            raise ModelError("reward table must have shape (S, d1, d2)")
        if not np.all(np.isfinite(rew)):
            raise ModelError("rewards must be finite")
        row_sums = trans.sum(axis=-1)
        if np.any(trans < -1e-12) or np.any(np.abs(row_sums - 1.0) > 1e-12):
            raise ModelError("each transition row must be a distribution")
        if not 0.0 <= self.gamma < 1.0:
            raise ModelError("gamma must lie in [0, 1)")
        unknown = set(self.terminals) - set(self.states)
        if unknown:
            raise ModelError(f"terminal states not in the state set: {unknown}")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "terminals", frozenset(self.terminals))
        object.__setattr__(self, "transition", _frozen(trans))
        object.__setattr__(self, "rewards", _frozen(rew))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def r_max(self) -> float:
        return float(np.abs(self.rewards).max())

    @property
    def value_bound(self) -> float:
        """L = R_max / (1 - gamma)."""
        return self.r_max / (1.0 - self.gamma)

    def terminal_mask(self) -> np.ndarray:
        return np.array([s in self.terminals for s in self.states])

    def state_game(self, q_state: np.ndarray, single_agent: bool = False) -> MatrixGame:
        """The one-shot game induced at a state by a Q table slice."""
        if single_agent or self.n_actions[1] == 1:
            return MatrixGame.single_agent(q_state[:, 0])
        return MatrixGame.zero_sum_from_payoff(q_state)

    @property
    def is_single_agent(self) -> bool:
        return self.n_actions[1] == 1


def matrix_game_from_json(obj: dict) -> MatrixGame:
    payoff_1 = np.array(obj["payoff_1"], dtype=float)
    zero_sum = bool(obj.get("zero_sum", "payoff_2" not in obj))
    if zero_sum:
        if "payoff_2" in obj and not np.array_equal(
                np.array(obj["payoff_2"], dtype=float), -payoff_1):
            raise ModelError("zero_sum game with payoff_2 != -payoff_1")
        return MatrixGame.zero_sum_from_payoff(payoff_1, r_max=obj.get("r_max"))
    return MatrixGame.general_sum(payoff_1, np.array(obj["payoff_2"], dtype=float),
                                  r_max=obj.get("r_max"))


def tabular_sg_from_json(obj: dict) -> TabularSG:
    """Schema: {states, actions: [d1, d2], transition, rewards, gamma, terminals}.

    ``transition`` maps state name -> nested [a1][a2][s'] probabilities and
    ``rewards`` maps state name -> nested [a1][a2] floats, with s' indexed in
    the order of ``states``.
    """
    states = [str(s) for s in obj["states"]]
    d1, d2 = (int(x) for x in obj["actions"])
    trans = np.zeros((len(states), d1, d2, len(states)))
    rew = np.zeros((len(states), d1, d2))
    for k, s in enumerate(states):
        try:
            trans[k] = np.array(obj["transition"][s], dtype=float)
            rew[k] = np.array(obj["rewards"][s], dtype=float)
        except (KeyError, ValueError) as exc:
            raise ModelError(f"bad transition/reward entry for state {s!r}: {exc}")
    return TabularSG(
        states=tuple(states),
        n_actions=(d1, d2),
        transition=trans,
        rewards=rew,
        gamma=float(obj["gamma"]),
        terminals=frozenset(str(s) for s in obj.get("terminals", [])),
    )


def load_matrix_game(path) -> MatrixGame:
    with open(path) as fh:
        return matrix_game_from_json(json.load(fh))


def load_tabular_sg(path) -> TabularSG:
    with open(path) as fh:
        return tabular_sg_from_json(json.load(fh))


def matching_pennies() -> MatrixGame:
    return MatrixGame.zero_sum_from_payoff([[1.0, -1.0], [-1.0, 1.0]])


def rock_paper_scissors() -> MatrixGame:
    return MatrixGame.zero_sum_from_payoff(
        [[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def random_zero_sum(d1: int, d2: int, seed: int, r_max: float = 1.0) -> MatrixGame:
    rng = np.random.default_rng(seed)
    payoff = rng.uniform(-r_max, r_max, size=(d1, d2))
    return MatrixGame.zero_sum_from_payoff(payoff, r_max=r_max)


def chain_mdp(n_states: int = 3, gamma: float = 0.9,
              goal_reward: float = 1.0) -> TabularSG:
    """Deterministic single-agent chain: action 0 steps left, 1 steps right.

    Being in the rightmost state pays ``goal_reward`` regardless of action;
    ends are absorbing walls (stepping off stays put).
    """
    states = tuple(f"s{i}" for i in range(n_states))
    trans = np.zeros((n_states, 2, 1, n_states))
    rew = np.zeros((n_states, 2, 1))
    for i in range(n_states):
        trans[i, 0, 0, max(i - 1, 0)] = 1.0
        trans[i, 1, 0, min(i + 1, n_states - 1)] = 1.0
        if i == n_states - 1:
            rew[i, :, 0] = goal_reward
    return TabularSG(states=states, n_actions=(2, 1), transition=trans,
                     rewards=rew, gamma=gamma)


def single_state_sg(game: MatrixGame) -> TabularSG:
    """Wrap a matrix game as a gamma=0 one-state stochastic game."""
    if not game.zero_sum and game.shape[1] != 1:
        raise ConfigError("single-state wrapping needs a zero-sum or bandit game")
    d1, d2 = game.shape
    trans = np.ones((1, d1, d2, 1))
    return TabularSG(states=("s0",), n_actions=(d1, d2), transition=trans,
                     rewards=game.payoff_1.reshape(1, d1, d2), gamma=0.0)
