"""Exact tabular learner: soft policy evaluation + per-state regularized-leader improvement.

The evaluation sweep applies the entropy-corrected Bellman operator with
exact expectations (no sampling, no replay buffer): the bootstrap values
each successor state at the policy's expected Q minus the temperature
times the acting players' log-probabilities, each with the sign it carries
in the zero-sum regularized objective.  Improvement applies the
mirror-descent closed form state by state, which attains the KL-projection
argmax exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import Density, JointPolicy, entropy, joint_kl
from .dynamics import (Trajectory, TrajectoryPoint, md_step,
                       theorem_step_bound)
from .equilibrium import exploitability
from .errors import ConfigError
from .games import TabularSG

PerStatePolicy = dict[str, JointPolicy]


@dataclass(frozen=True)
class TabularQ:
    """Player-1 state-action value table (player 2's view is the negation)."""

    q_values: np.ndarray
    sweeps_used: int = 0
    deltas: tuple[float, ...] = ()
    converged: bool = True

    def state_slice(self, index: int) -> np.ndarray:
        return self.q_values[index]


@dataclass(frozen=True)
class Algorithm1Config:
    eta: float
    alpha: float
    outer_iterations: int
    eval_sweeps: int = 1000
    improve_steps: int = 1
    damping_tau: float = 1.0
    eval_tol: float = 1e-12
    record_every: int = 1

    def __post_init__(self):
        if self.eta <= 0 or self.alpha < 0:
            raise ConfigError("need eta > 0 and alpha >= 0")
        if min(self.outer_iterations, self.eval_sweeps, self.improve_steps,
               self.record_every) < 1:
            raise ConfigError("iteration counts must be positive")
        if not 0 < self.damping_tau <= 1:
            raise ConfigError("damping_tau must lie in (0, 1]")
        if self.eval_tol < 0:
            raise ConfigError("eval_tol must be nonnegative")


def uniform_policy(sg: TabularSG) -> PerStatePolicy:
    d1, d2 = sg.n_actions
    ref = sg.state_game(np.zeros((d1, d2)))
    joint = (Density.uniform(ref.support_1), Density.uniform(ref.support_2))
    return {s: joint for s in sg.states}


def _policy_weights(sg: TabularSG, pi: PerStatePolicy) -> tuple[np.ndarray, np.ndarray]:
    w1 = np.stack([pi[s][0].values * pi[s][0].support.measures for s in sg.states])
    w2 = np.stack([pi[s][1].values * pi[s][1].support.measures for s in sg.states])
    return w1, w2


def _entropy_corrected(sg: TabularSG, pi: PerStatePolicy, q: np.ndarray,
                       alpha: float) -> np.ndarray:
    """Q(s,a1,a2) - alpha*log pi1(a1|s) + alpha*log pi2(a2|s), per state."""
    log1 = np.stack([pi[s][0].log_values for s in sg.states])
    log2 = np.stack([pi[s][1].log_values for s in sg.states])
    return q - alpha * log1[:, :, None] + alpha * log2[:, None, :]


def soft_values(sg: TabularSG, pi: PerStatePolicy, q: np.ndarray,
                alpha: float) -> np.ndarray:
    """Per-state policy value under Q with the entropy corrections; 0 at terminals."""
    w1, w2 = _policy_weights(sg, pi)
    corrected = _entropy_corrected(sg, pi, q, alpha)
    v = np.einsum("si,sij,sj->s", w1, corrected, w2)
    v[sg.terminal_mask()] = 0.0
    return v


def soft_policy_evaluation(sg: TabularSG, pi: PerStatePolicy,
                           config: Algorithm1Config,
                           q_init: np.ndarray | None = None) -> TabularQ:
    """Iterate the exact-expectation soft Bellman operator for the joint policy.

    Each sweep computes r + gamma * E_{s'}[V(s')] from the current target
    table and mixes it in with weight ``damping_tau``; stops when the
    sup-norm change drops to ``eval_tol`` or the sweep budget runs out.
    Terminal states contribute their immediate reward only.
    """
    q = np.array(q_init, dtype=float) if q_init is not None \
        else np.zeros_like(sg.rewards)
    terminal = sg.terminal_mask()
    deltas = []
    converged = False
    sweeps = 0
    for sweeps in range(1, config.eval_sweeps + 1):
        v = soft_values(sg, pi, q, config.alpha)
        backup = sg.rewards + sg.gamma * np.einsum("sijt,t->sij", sg.transition, v)
        backup[terminal] = sg.rewards[terminal]
        new_q = (1.0 - config.damping_tau) * q + config.damping_tau * backup
        delta = float(np.abs(new_q - q).max())
        deltas.append(delta)
        q = new_q
        if delta <= config.eval_tol:
            converged = True
            break
    return TabularQ(q, sweeps_used=sweeps, deltas=tuple(deltas),
                    converged=converged)


def per_state_improve(sg: TabularSG, pi_t: PerStatePolicy, q: TabularQ,
                      eta: float, alpha: float) -> PerStatePolicy:
    """Mirror-descent closed form applied to the game each state induces under Q."""
    if not np.all(np.isfinite(q.q_values)):
        raise ValueError("Q table contains non-finite values")
    out = {}
    for k, s in enumerate(sg.states):
        out[s] = md_step(pi_t[s], sg.state_game(q.state_slice(k)), eta, alpha)
    return out


def run_algorithm1(sg: TabularSG, config: Algorithm1Config,
                   reference: PerStatePolicy | None = None
                   ) -> tuple[PerStatePolicy, TabularQ, Trajectory]:
    """Alternate soft evaluation and per-state improvement.

    Per round: evaluate the current joint policy (warm-started from the
    previous table), then apply ``improve_steps`` closed-form updates.
    Records the max-over-states joint KL to the reference policy, the
    max-over-states induced-game exploitability, the initial state's
    entropies and its soft value.  Deterministic.
    """
    pi = uniform_policy(sg)
    q = TabularQ(np.zeros_like(sg.rewards))
    warn: list[str] = []
    b_seen = _max_density(pi)
    points = [_point(0, sg, pi, q, config.alpha, reference)]
    for t in range(1, config.outer_iterations + 1):
        q = soft_policy_evaluation(sg, pi, config, q_init=q.q_values)
        if not q.converged and not warn:
            warn.append(
                f"policy evaluation hit the sweep cap at round {t} with "
                f"residual {q.deltas[-1]:.3e} > eval_tol={config.eval_tol}")
        for _ in range(config.improve_steps):
            pi = per_state_improve(sg, pi, q, config.eta, config.alpha)
        b_seen = max(b_seen, _max_density(pi))
        if t % config.record_every == 0 or t == config.outer_iterations:
            points.append(_point(t, sg, pi, q, config.alpha, reference))
    eta_bound = theorem_step_bound(b_seen, config.alpha, sg.r_max, sg.gamma)
    traj = Trajectory(tuple(points), pi, b_seen, eta_bound, tuple(warn))
    return pi, q, traj


def _max_density(pi: PerStatePolicy) -> float:
    return max(d.max_value for joint in pi.values() for d in joint)


def _point(t: int, sg: TabularSG, pi: PerStatePolicy, q: TabularQ,
           alpha: float, reference: PerStatePolicy | None) -> TrajectoryPoint:
    kl_ref = float("nan")
    if reference is not None:
        kl_ref = max(joint_kl(reference[s], pi[s]) for s in sg.states)
    expl = max(
        exploitability(sg.state_game(q.state_slice(k)), pi[s])
        for k, s in enumerate(sg.states)
    )
    s0 = sg.states[0]
    v0 = soft_values(sg, pi, q.q_values, alpha)[0]
    return TrajectoryPoint(
        t=t, kl_ref=kl_ref, exploitability=expl,
        entropy_1=entropy(pi[s0][0]), entropy_2=entropy(pi[s0][1]),
        value=float(v0),
    )
