"""Brute-force reference computations for small models.

Everything here enumerates spin configurations explicitly and runs in
float64. These functions check the analytic formulas in :mod:`nbm.core` and
the sampler in :mod:`nbm.sampler`; they are deliberately slow and simple.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import core, sampler
from .errors import CapacityError

MAX_HIDDEN = 12
MAX_VISIBLE = 14
MAX_GRAD_VISIBLE = 12


def spin_states(n):
    """All of {-1, +1}^n as a (2^n, n) float64 array, first unit slowest."""
    idx = np.arange(2**n)[:, None]
    bits = (idx >> np.arange(n - 1, -1, -1)) & 1
    return np.where(bits == 1, 1.0, -1.0)


@dataclass
class ProbTable:
    states: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        assert np.all(self.probs >= 0)
        assert abs(self.probs.sum() - 1.0) < 1e-12


def _f64(p):
    return p.astype(np.float64)


def brute_free_energy(p, y):
    """-log of the average of exp(-energy) over every hidden configuration.

    Averaging (rather than summing) over the 2^n_h states subtracts the
    constant n_h*log(2), which is what the log-cosh form omits.
    """
    if p.n_h > MAX_HIDDEN:
        raise CapacityError(f"n_h={p.n_h} exceeds enumeration cap {MAX_HIDDEN}")
    p = _f64(p)
    hs = spin_states(p.n_h)
    e = np.array([core.energy(p, np.asarray(y, np.float64), h) for h in hs])
    return -(logsumexp(-e) - p.n_h * np.log(2.0))


def exact_distribution_ising(p):
    """Exact p(y | x) over y in {-1, +1}^n_y."""
    if p.n_y > MAX_VISIBLE:
        raise CapacityError(f"n_y={p.n_y} exceeds enumeration cap {MAX_VISIBLE}")
    p = _f64(p)
    ys = spin_states(p.n_y)
    u = core.free_energy(p, ys)
    logp = -u - logsumexp(-u)
    probs = np.exp(logp)
    return ProbTable(ys, probs / probs.sum())


def exact_joint_ising(p):
    """Exact p(y, h | x) as a (2^n_y, 2^n_h) table from the joint energy."""
    if p.n_y + p.n_h > MAX_VISIBLE:
        raise CapacityError("joint state space too large to enumerate")
    p = _f64(p)
    ys, hs = spin_states(p.n_y), spin_states(p.n_h)
    e = np.array([[core.energy(p, y, h) for h in hs] for y in ys])
    logp = -e - logsumexp(-e)
    return np.exp(logp)


def _kernel(fields, states):
    """Rows: conditioning config; cols: target config; product of spin probs."""
    prob_up = sampler.spin_prob(fields)[:, None, :]
    s = states[None, :, :]
    return np.prod(np.where(s > 0, prob_up, 1.0 - prob_up), axis=-1)


def gibbs_kernels(p):
    """(p(h | y), p(y | h)) as dense matrices for an Ising-visible model."""
    p = _f64(p)
    ys, hs = spin_states(p.n_y), spin_states(p.n_h)
    h_fields = np.array([_hidden_field(p, y) for y in ys])
    y_fields = np.array([sampler.visible_field_ising(p, h) for h in hs])
    return _kernel(h_fields, hs), _kernel(y_fields, ys)


def _hidden_field(p, y):
    return (y - p.mu) @ p.w


def gibbs_sweep_table(p, joint):
    """Apply one h-then-y block Gibbs sweep to a joint probability table."""
    k_h, k_y = gibbs_kernels(p)
    after_h = joint.sum(axis=1)[:, None] * k_h
    return (after_h.sum(axis=0)[:, None] * k_y).T


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def state_index(y):
    """Row index into :func:`spin_states` for each +-1 row of ``y``."""
    bits = (np.asarray(y) > 0).astype(np.int64)
    n = bits.shape[-1]
    return bits @ (1 << np.arange(n - 1, -1, -1))


def exact_nll(model, x, y):
    """-mean log p(y | x) with the partition function enumerated."""
    model = model.astype(np.float64)
    p, _ = core.condition(model, x)
    if p.n_y > MAX_VISIBLE:
        raise CapacityError("too many visibles to enumerate")
    ys = spin_states(p.n_y)
    total = 0.0
    for i in range(len(x)):
        pi = p[i]
        log_z = logsumexp(-core.free_energy(pi, ys))
        total += core.free_energy(pi, np.asarray(y[i], np.float64)) + log_z
    return total / len(x)


def exact_nll_grad(model, x, y):
    """Exact NLL gradient: data term minus model expectation, enumerated."""
    model = model.astype(np.float64)
    if model.spec.n_y > MAX_GRAD_VISIBLE:
        raise CapacityError("too many visibles for exact gradient")
    x = np.asarray(x, np.float64)
    n = x.shape[0]
    grads = model.zero_grads()
    core.free_energy_backward(model, x, y, +1.0, grads)

    p, _ = core.condition(model, x)
    ys = spin_states(model.spec.n_y)
    m = ys.shape[0]
    weights = np.concatenate([exact_distribution_ising(p[i]).probs for i in range(n)]) / n
    x_rep = np.repeat(x, m, axis=0)
    y_rep = np.tile(ys, (n, 1))
    p_rep, cache = core.condition(model, x_rep)
    g_mu, g_prec, g_w = core.free_energy_param_grads(p_rep, y_rep)
    core.cond_backward(model, cache, g_mu * weights[:, None], g_prec * weights[:, None],
                       g_w * weights[:, None, None], grads, -1.0)
    return grads


def fd_check(f, params, grads, step=1e-5, floor=1e-8):
    """Largest elementwise relative error between ``grads`` and central differences.

    ``f`` is a zero-argument callable reading ``params`` (float64 arrays that
    are perturbed in place and restored).
    """
    worst = 0.0
    for arr, g in zip(params, grads):
        flat = arr.reshape(-1)
        g = np.asarray(g, np.float64).reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = f()
            flat[i] = old - step
            down = f()
            flat[i] = old
            num = (up - down) / (2 * step)
            err = abs(num - g[i]) / max(abs(g[i]), floor)
            worst = max(worst, err)
    return worst
