"""Independent reference computations used by the test suite.

These deliberately avoid the library's own closed forms: the simplex
maximizer is projected gradient ascent, the tabular reference is dense
soft value iteration.  Both are brute-force and slow but trustworthy.
"""

import numpy as np


def project_to_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def projected_gradient_soft_max(values, alpha, measures, iters=20000,
                                step_tol=1e-14):
    """Maximize <g,u> + alpha*H(g) over densities g by projected gradient
    ascent with Armijo backtracking on the probability-mass vector."""
    values = np.asarray(values, dtype=float)
    m = np.asarray(measures, dtype=float)

    def objective(p):
        plogp = np.where(p > 0, p * np.log(np.maximum(p, 1e-300) / m), 0.0)
        return p @ values - alpha * plogp.sum()

    p = np.ones_like(values) / values.size
    f = objective(p)
    lr = 1.0
    for _ in range(iters):
        grad = values - alpha * (np.log(np.maximum(p, 1e-300) / m) + 1.0)
        while lr >= 1e-13:
            cand = project_to_simplex(p + lr * grad)
            f_cand = objective(cand)
            if f_cand > f:
                break
            lr *= 0.5
        else:
            break
        step = np.abs(cand - p).max()
        p, f = cand, f_cand
        lr = min(lr * 2.0, 1e3)
        if step < step_tol:
            break
    return p / m


def soft_value_iteration(sg, alpha, tol=1e-14, iters=200000):
    """Single-agent entropy-regularized optimality: dense Bellman sweeps.

    Returns the optimal soft Q table and the Boltzmann policy over it.
    """
    v = np.zeros(sg.n_states)
    terminal = sg.terminal_mask()
    r = sg.rewards[:, :, 0]
    p = sg.transition[:, :, 0, :]
    for _ in range(iters):
        q = r + sg.gamma * np.einsum("sat,t->sa", p, v)
        q[terminal] = r[terminal]
        new_v = alpha * np.log(np.exp(q / alpha).sum(axis=1))
        new_v[terminal] = 0.0
        if np.abs(new_v - v).max() <= tol:
            v = new_v
            break
        v = new_v
    q = r + sg.gamma * np.einsum("sat,t->sa", p, v)
    q[terminal] = r[terminal]
    pi = np.exp(q / alpha)
    pi /= pi.sum(axis=1, keepdims=True)
    return q, pi
