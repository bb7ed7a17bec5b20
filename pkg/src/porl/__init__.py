"""Entropy-regularized mirror-descent / regularized-leader game dynamics.

Last-iterate learning on matrix games, discretized kernel games on compact
boxes, and tabular stochastic games, with closed-form log-space updates, a
QRE reference solver, an exact tabular policy-iteration learner, a
squashed-Gaussian parametric pathway with hand-coded pathwise gradients,
and a config-driven CLI that writes CSV reports and figures.
"""

from .density import (Density, JointPolicy, Support, entropy, joint_kl, kl,
                      kl_three_point, l2_dist)
from .dynamics import (DynamicsConfig, Trajectory, TrajectoryPoint,
                       ftrl_cumulative_step, ftrl_step, md_step, mwu_step,
                       run_dynamics, theorem_step_bound)
from .equilibrium import (QreSolution, cross_play, exploitability,
                          qre_solve, soft_optimal)
from .errors import (ConfigError, ConvergenceError, DomainError, ModelError,
                     SupportMismatchError)
from .games import (KernelGame, MatrixGame, TabularSG, discretize,
                    marginal_q, expected_payoff)
from .param_policy import (ParamTrainConfig, SquashedGaussian, log_prob,
                           policy_objective, policy_objective_grad, sample,
                           train)
from .tabular import (Algorithm1Config, TabularQ, per_state_improve,
                      run_algorithm1, soft_policy_evaluation)

__all__ = [
    "Algorithm1Config", "ConfigError", "ConvergenceError", "Density",
    "DomainError", "DynamicsConfig", "JointPolicy", "KernelGame",
    "MatrixGame", "ModelError", "ParamTrainConfig", "QreSolution",
    "SquashedGaussian", "Support", "SupportMismatchError", "TabularQ",
    "TabularSG", "Trajectory", "TrajectoryPoint", "cross_play", "discretize",
    "entropy", "expected_payoff", "exploitability", "ftrl_cumulative_step",
    "ftrl_step", "joint_kl", "kl", "kl_three_point", "l2_dist", "log_prob",
    "marginal_q", "md_step", "mwu_step", "per_state_improve",
    "policy_objective", "policy_objective_grad", "qre_solve",
    "run_algorithm1", "run_dynamics", "sample", "soft_optimal",
    "soft_policy_evaluation", "theorem_step_bound", "train",
]

__version__ = "0.1.0"
