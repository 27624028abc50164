"""Oracle-backed verification routines.

Each ``measure_*`` function returns plain numbers; callers decide the
thresholds. :func:`run_suite` wires them into the ``nbm check`` table.
"""
import time
from dataclasses import dataclass

import numpy as np

from . import core, oracle, sampler, trainer
from .core import CondParams
from .diffnet import MlpSpec


def random_params(rng, n_y, n_h, w_scale=1.0):
    return CondParams(rng.normal(size=n_y), np.exp(rng.uniform(-1, 1, size=n_y)),
                      rng.normal(scale=w_scale, size=(n_y, n_h)) / np.sqrt(n_y))


def measure_marginalization(n_models=200, seed=0):
    """Worst relative gap between log-cosh free energy and hidden enumeration."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_models):
        n_h = 1 + i % 12
        n_y = int(rng.integers(1, 7))
        p = random_params(rng, n_y, n_h, w_scale=2.0)
        y = p.mu + rng.normal(scale=1.5, size=n_y)
        a = core.free_energy(p, y)
        b = oracle.brute_free_energy(p, y)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst


def small_model(seed, n_x=3, n_y=4, n_h=3, tanh_bias=False, kind="gaussian", hidden=5):
    """float64 model with randomised (non-zero) biases, for gradient checks."""
    two = MlpSpec(n_x, (hidden, n_y), ("relu", "identity"))
    spec = core.NbmSpec(n_x, n_y, n_h, kind, two, MlpSpec(n_x, (hidden, n_y), ("tanh", "identity")),
                        MlpSpec(n_x, (n_y * n_h,), ("identity",)), tanh_bias)
    model = core.init_model(spec, seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1000)
    for _, arr in model.named_params():
        arr += rng.normal(scale=0.3, size=arr.shape)
    return model


def _fd(model, f, grads, step=1e-5):
    params = [p for _, p in model.named_params()]
    flat = [g for acc in grads for g in acc.grads]
    return oracle.fd_check(f, params, flat, step=step)


def measure_gradients(restarts=20, seed=0):
    """Worst FD relative error for free energy and penalty (both modes)."""
    worst = {"free_energy": 0.0, "penalty_output": 0.0, "penalty_weight_decay": 0.0}
    for r in range(restarts):
        model = small_model(seed + r, tanh_bias=bool(r % 2))
        rng = np.random.default_rng(seed + r)
        x = rng.normal(size=(5, 3))
        y = rng.normal(size=(5, 4))

        grads = model.zero_grads()
        core.free_energy_backward(model, x, y, 1.0, grads)
        fe = lambda: float(np.mean(core.free_energy(core.condition(model, x)[0], y)))
        worst["free_energy"] = max(worst["free_energy"], _fd(model, fe, grads))

        for mode in ("output", "weight_decay"):
            cfg = trainer.TrainConfig(penalty_mode=mode)
            grads = model.zero_grads()
            trainer.penalty_term(model, core.condition(model, x), cfg, grads)
            pen = lambda: trainer.penalty_term(model, core.condition(model, x), cfg,
                                               model.zero_grads())
            key = f"penalty_{mode}"
            worst[key] = max(worst[key], _fd(model, pen, grads))
    return worst


def random_ising_params(seed=0, n_y=4, n_h=3):
    rng = np.random.default_rng(seed)
    return CondParams(np.tanh(rng.normal(size=n_y)), np.exp(rng.uniform(-0.5, 0.5, size=n_y)),
                      rng.normal(scale=1.0, size=(n_y, n_h)))


def tiny_ising_params(seed=0):
    """CondParams of the enumerable Ising NBM at a fixed conditioning input."""
    model = cd_test_model(seed)
    x = np.random.default_rng(seed + 3).normal(size=(1, 2))
    return core.condition(model, x)[0][0]


def measure_sweep_invariance(seed=0, n_y=4, n_h=3):
    p = random_ising_params(seed, n_y, n_h)
    joint = oracle.exact_joint_ising(p)
    after = oracle.gibbs_sweep_table(p, joint)
    return float(np.max(np.abs(after - joint)))


def measure_sampler_tv(n_chains=200_000, k=50, seed=0):
    p = tiny_ising_params(seed)
    exact = oracle.exact_distribution_ising(p)
    y = sampler.run_chain(p, sampler.SampleOptions(k), sampler.Streams(seed + 17, np.arange(n_chains)),
                          "ising")
    counts = np.bincount(oracle.state_index(y), minlength=len(exact.probs))
    return oracle.total_variation(counts / n_chains, exact.probs)


def cd_test_model(seed=0, jitter=0.25):
    """Enumerable Ising NBM: n_x=2, n_y=4, n_h=3, affine parameter nets."""
    spec = core.NbmSpec(2, 4, 3, "ising", MlpSpec(2, (4,), ("identity",)),
                        MlpSpec(2, (4,), ("identity",)), MlpSpec(2, (12,), ("identity",)),
                        tanh_bias=True)
    model = core.init_model(spec, seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    for _, arr in model.named_params():
        arr += rng.normal(scale=jitter, size=arr.shape)
    return model


def measure_cd_estimator(n_chains=10_000, k=50, replicates=100, seed=0):
    """z-scores of the replicate-averaged CD gradient against the exact NLL gradient."""
    model = cd_test_model(seed)
    rng = np.random.default_rng(seed + 2)
    x = rng.normal(size=(4, 2))
    y = np.where(rng.random((4, 4)) < 0.5, 1.0, -1.0)
    exact = oracle.exact_nll_grad(model, x, y).flat()
    per = n_chains // replicates
    reps = per // len(x)
    xb, yb = np.tile(x, (reps, 1)), np.tile(y, (reps, 1))
    cfg = trainer.TrainConfig(k_steps=k, l2_w=0.0, l2_mu=0.0, l2_prec=0.0, seed=seed, dtype="float64")
    samples = np.array([trainer.cd_step(model, xb, yb, cfg, step=r)[0].flat() for r in range(replicates)])
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(replicates)
    diff = np.abs(mean - exact)
    z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff < 1e-12, 0.0, np.inf))
    return {"max_z": float(z.max()), "n_params": int(z.size), "z": z,
            "mean": mean, "exact": exact, "se": se}


def measure_gaussian_moments(n=100_000, seed=0):
    """Largest z-score of draw means and variances against (mu, 1/prec) with W = 0."""
    rng = np.random.default_rng(seed)
    p = CondParams(rng.normal(size=3), np.array([1.0, 4.0, 0.25]), np.zeros((3, 2)))
    h = np.ones(2)
    y = sampler.sample_visible_gaussian(p, h, sampler.Streams(seed, np.arange(n)))
    var = 1.0 / p.prec
    z_mean = np.abs(y.mean(axis=0) - p.mu) / np.sqrt(var / n)
    z_var = np.abs(y.var(axis=0, ddof=1) - var) / (var * np.sqrt(2.0 / (n - 1)))
    return float(max(z_mean.max(), z_var.max()))


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: str
    seconds: float


def _checks(fast):
    items = [
        ("marginalization", lambda: measure_marginalization(200 if not fast else 50), lambda v: v < 1e-8, "< 1e-8 rel"),
        ("gradients_fd", lambda: max(measure_gradients(20 if not fast else 3).values()), lambda v: v < 1e-4, "< 1e-4 rel"),
        ("gibbs_sweep_invariance", measure_sweep_invariance, lambda v: v < 1e-10, "< 1e-10"),
        ("gaussian_moments", lambda: measure_gaussian_moments(100_000 if not fast else 20_000), lambda v: v < 5.0, "< 5 SE"),
    ]
    if not fast:
        items += [
            ("sampler_tv", measure_sampler_tv, lambda v: v < 0.02, "< 0.02"),
            ("cd_estimator", lambda: measure_cd_estimator()["max_z"], lambda v: v < 3.0, "< 3 SE"),
        ]
    return items


def run_suite(fast=False, out=print):
    results = []
    out(f"{'check':<24} {'status':<6} {'value':>12}  threshold")
    for name, fn, ok, threshold in _checks(fast):
        t0 = time.perf_counter()
        try:
            value = float(fn())
            passed = bool(ok(value)) and np.isfinite(value)
        except Exception as exc:  # a crashing check is a failing check
            value, passed = float("nan"), False
            out(f"{name}: error {exc!r}")
        res = CheckResult(name, passed, value, threshold, time.perf_counter() - t0)
        results.append(res)
        out(f"{name:<24} {'PASS' if passed else 'FAIL':<6} {value:>12.4g}  {threshold}")
    return results
