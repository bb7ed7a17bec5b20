"""Squashed diagonal-Gaussian policy with hand-coded pathwise gradients.

Actions are tanh(mu + sigma * eps) with eps from a fixed noise batch
(common random numbers), so the sampled objective is a deterministic
function of the parameters and finite-difference checks are exact up to
truncation.  Gradients are chain-ruled by hand through the tanh squashing
and the reparameterization; no autodiff.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .density import Density, Support, _frozen
from .errors import ConfigError, DomainError

LOG_2PI = math.log(2.0 * math.pi)
ATANH_GUARD = 1e-9


@dataclass(frozen=True)
class SquashedGaussian:
    """tanh-squashed diagonal Gaussian on (-1, 1)^dim."""

    mu: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        ls = np.asarray(self.log_sigma, dtype=float).ravel()
        if mu.shape != ls.shape or mu.size == 0:
            raise ValueError("mu and log_sigma must share a nonzero shape")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(ls))):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "mu", _frozen(mu).ravel())
        object.__setattr__(self, "log_sigma", _frozen(ls).ravel())

    @property
    def action_dim(self) -> int:
        return self.mu.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def to_json(self) -> dict:
        return {"mu": list(map(float, self.mu)),
                "log_sigma": list(map(float, self.log_sigma))}

    @staticmethod
    def from_json(obj: dict) -> "SquashedGaussian":
        return SquashedGaussian(np.array(obj["mu"], dtype=float),
                                np.array(obj["log_sigma"], dtype=float))


def sample(policy: SquashedGaussian, noise: np.ndarray) -> np.ndarray:
    """a = tanh(mu + sigma * eps); deterministic in (params, noise).

    ``noise`` may be a single vector (dim,) or a batch (n, dim).
    """
    noise = np.asarray(noise, dtype=float)
    if noise.shape[-1] != policy.action_dim:
        raise ValueError("noise dimension must equal action_dim")
    return np.tanh(policy.mu + policy.sigma * noise)


def _log_squash_correction(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)), cancellation-free."""
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def log_prob_pre_tanh(policy: SquashedGaussian, u: np.ndarray) -> np.ndarray:
    """Log-density of a = tanh(u) given the Gaussian pre-squash value u."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    z = (u - policy.mu) / policy.sigma
    gauss = -0.5 * (LOG_2PI + z * z) - policy.log_sigma
    return (gauss - _log_squash_correction(u)).sum(axis=-1)


def log_prob(policy: SquashedGaussian, action: np.ndarray) -> float:
    """Change-of-variables log-density at a squashed action.

    Components within ``ATANH_GUARD`` of the box edge are rejected rather
    than clamped: silent clamping would corrupt gradient checks.
    """
    action = np.asarray(action, dtype=float).ravel()
    if action.shape[0] != policy.action_dim:
        raise ValueError("action dimension must equal action_dim")
    if np.any(np.abs(action) >= 1.0 - ATANH_GUARD):
        raise DomainError("action is outside (or too close to the edge of) (-1, 1)")
    return float(log_prob_pre_tanh(policy, np.arctanh(action))[0])


def policy_objective(theta: SquashedGaussian, pi_prev: SquashedGaussian,
                     q_fn: Callable[[np.ndarray], np.ndarray], eta: float,
                     alpha: float, noise_batch: np.ndarray,
                     alpha_on_previous: bool = False) -> float:
    """Sampled KL-projection loss for the proximal policy update.

    J = mean over the batch of (1/eta)*(log pi_theta(a) - log pi_prev(a))
    - q(a) + alpha*log pi_theta(a), with a = sample(theta, eps).  Passing
    ``alpha_on_previous`` evaluates the temperature term at pi_prev instead
    (the lagged variant); ``eta=inf`` drops the proximal term.
    """
    if theta.action_dim != pi_prev.action_dim:
        raise ValueError("policies must share action_dim")
    noise = np.atleast_2d(np.asarray(noise_batch, dtype=float))
    u = theta.mu + theta.sigma * noise
    actions = np.tanh(u)
    q_vals = np.asarray(q_fn(actions), dtype=float).ravel()
    if not np.all(np.isfinite(q_vals)):
        raise ValueError("q_fn returned a non-finite value")
    log_theta = log_prob_pre_tanh(theta, u)
    log_prev = log_prob_pre_tanh(pi_prev, u)
    inv_eta = 0.0 if math.isinf(eta) else 1.0 / eta
    temp_term = log_prev if alpha_on_previous else log_theta
    j = inv_eta * (log_theta - log_prev) - q_vals + alpha * temp_term
    return float(j.mean())


def policy_objective_grad(theta: SquashedGaussian, pi_prev: SquashedGaussian,
                          q_fn: Callable[[np.ndarray], np.ndarray],
                          q_grad: Callable[[np.ndarray], np.ndarray],
                          eta: float, alpha: float, noise_batch: np.ndarray,
                          alpha_on_previous: bool = False
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Pathwise gradient of ``policy_objective`` w.r.t. (mu, log_sigma).

    ``q_grad`` maps a batch of actions to dq/da.  All three parameter
    dependencies flow through u = mu + sigma*eps: the reparameterized own
    log-density, the previous policy's log-density at the moving action,
    and the q term via da/du = 1 - a^2.
    """
    noise = np.atleast_2d(np.asarray(noise_batch, dtype=float))
    n = noise.shape[0]
    sigma = theta.sigma
    u = theta.mu + sigma * noise
    a = np.tanh(u)
    du_dls = sigma * noise              # du/d(log_sigma)
    da_du = 1.0 - a * a

    # own log-density at the sampled action: log N(u) reduces to
    # -log sigma - eps^2/2 - const, so only the squash correction moves
    # with u; d/du log pi_theta = 2*tanh(u).
    d_own_mu = 2.0 * a
    d_own_ls = -1.0 + 2.0 * a * du_dls

    # previous policy's log-density at the moving action (v = atanh(a) = u)
    z_prev = (u - pi_prev.mu) / pi_prev.sigma
    d_prev_du = -z_prev / pi_prev.sigma + 2.0 * a
    d_prev_mu = d_prev_du
    d_prev_ls = d_prev_du * du_dls

    dq = np.atleast_2d(np.asarray(q_grad(a), dtype=float))
    if dq.shape != a.shape:
        raise ValueError("q_grad must return one derivative per action component")
    d_q_mu = dq * da_du
    d_q_ls = dq * da_du * du_dls

    inv_eta = 0.0 if math.isinf(eta) else 1.0 / eta
    d_temp_mu = d_prev_mu if alpha_on_previous else d_own_mu
    d_temp_ls = d_prev_ls if alpha_on_previous else d_own_ls
    g_mu = (inv_eta * (d_own_mu - d_prev_mu) - d_q_mu + alpha * d_temp_mu)
    g_ls = (inv_eta * (d_own_ls - d_prev_ls) - d_q_ls + alpha * d_temp_ls)
    return g_mu.sum(axis=0) / n, g_ls.sum(axis=0) / n


@dataclass(frozen=True)
class ParamTrainConfig:
    eta: float
    alpha: float
    gradient_steps: int = 20000
    refresh_every: int = 100
    batch_size: int = 512
    learning_rate: float = 0.01
    seed: int = 0
    action_dim: int = 1
    record_every: int = 1000

    def __post_init__(self):
        if self.eta <= 0 or self.alpha < 0:
            raise ConfigError("need eta > 0 and alpha >= 0")
        if min(self.gradient_steps, self.refresh_every, self.batch_size,
               self.record_every) < 1:
            raise ConfigError("counts must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


def train(q_fn, q_grad, config: ParamTrainConfig,
          theta0: SquashedGaussian | None = None,
          callback=None) -> SquashedGaussian:
    """Proximal training loop: gradient descent on the sampled objective.

    The previous-round policy and the noise batch refresh together every
    ``refresh_every`` steps; within a round every evaluation reuses the
    same batch (common random numbers).  Plain gradient descent; the
    proximal term keeps steps well-conditioned.
    """
    rng = np.random.default_rng(config.seed)
    theta = theta0 if theta0 is not None else SquashedGaussian(
        np.zeros(config.action_dim), np.zeros(config.action_dim))
    pi_prev = theta
    noise = rng.standard_normal((config.batch_size, config.action_dim))
    for step in range(1, config.gradient_steps + 1):
        g_mu, g_ls = policy_objective_grad(
            theta, pi_prev, q_fn, q_grad, config.eta, config.alpha, noise)
        theta = SquashedGaussian(theta.mu - config.learning_rate * g_mu,
                                 theta.log_sigma - config.learning_rate * g_ls)
        if step % config.refresh_every == 0:
            pi_prev = theta
            noise = rng.standard_normal((config.batch_size, config.action_dim))
        if callback is not None and step % config.record_every == 0:
            callback(step, theta)
    return theta


def discretize_policy(policy: SquashedGaussian, resolution: int = 512) -> Density:
    """Midpoint-rule density of a 1-D squashed Gaussian on (-1, 1)."""
    if policy.action_dim != 1:
        raise ConfigError("discretization is defined for 1-D policies")
    support = Support.box([(-1.0, 1.0)], resolution)
    u = np.arctanh(support.centers[:, 0])
    logits = log_prob_pre_tanh(policy, u[:, None])
    return Density.from_logits(support, logits)


def save_policy(policy: SquashedGaussian, path) -> None:
    with open(path, "w") as fh:
        json.dump(policy.to_json(), fh)


def load_policy(path) -> SquashedGaussian:
    with open(path) as fh:
        return SquashedGaussian.from_json(json.load(fh))
