"""Contrastive-divergence training with L2 output penalties and Adam."""
import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import core, sampler
from .errors import ConfigError, NumericError
from .sampler import SampleOptions, Streams

log = logging.getLogger(__name__)

METRIC_FIELDS = ("step", "epoch", "pos_fe", "neg_fe", "gap", "penalty",
                 "grad_norm_theta", "grad_norm_phi", "grad_norm_psi", "pd_pass_frac")

PENALTY_MODES = ("output", "weight_decay")
DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 128
    epochs: int = 50
    k_steps: int = 32
    l2_w: float = 1.0
    l2_mu: float = 0.5
    l2_prec: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    seed: int = 0
    dtype: str = "float32"
    penalty_mode: str = "weight_decay"
    init_mode: str = "draw"
    max_steps: int = 0
    threads: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if min(self.l2_w, self.l2_mu, self.l2_prec) < 0:
            raise ConfigError("penalties must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.k_steps < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("k_steps and batch_size must be >= 1, epochs >= 0")
        if self.penalty_mode not in PENALTY_MODES:
            raise ConfigError(f"penalty_mode must be one of {PENALTY_MODES}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {tuple(DTYPES)}")

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    @classmethod
    def for_kind(cls, kind, **overrides):
        """Defaults with the per-visible-kind learning rate."""
        lr = 0.01 if kind == "ising" else 0.0005
        return cls(**{"learning_rate": lr, **overrides})


@dataclass
class OptState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_model(cls, model):
        params = [p for _, p in model.named_params()]
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def penalty_term(model, cond, cfg, grads):
    """L2 penalty value; its gradient is added to ``grads``.

    In ``output`` mode the penalty is on the network outputs (w, mu, prec),
    each averaged over batch and elements. In ``weight_decay`` mode it is on
    the raw parameters of each network instead, averaged over entries.
    """
    if cfg.penalty_mode == "weight_decay":
        value = 0.0
        for coef, net, acc in zip((cfg.l2_mu, cfg.l2_prec, cfg.l2_w), model.nets, grads):
            params = net.params()
            count = sum(p.size for p in params)
            value += coef * sum(float(np.sum(np.square(p, dtype=np.float64))) for p in params) / count
            for p, g in zip(params, acc.grads):
                g += (2.0 * coef / count) * p
        return value
    params, cache = cond
    mu, prec, w = params.mu, params.prec, params.w
    value = (cfg.l2_w * float(np.mean(np.square(w, dtype=np.float64)))
             + cfg.l2_mu * float(np.mean(np.square(mu, dtype=np.float64)))
             + cfg.l2_prec * float(np.mean(np.square(prec, dtype=np.float64))))
    dt = model.dtype.type
    core.cond_backward(model, cache,
                       mu * dt(2.0 * cfg.l2_mu / mu.size),
                       prec * dt(2.0 * cfg.l2_prec / prec.size),
                       w * dt(2.0 * cfg.l2_w / w.size), grads)
    return value


def step_streams(seed, step, n):
    """Chain streams for one training step: id = step * 2**32 + row."""
    return Streams(seed, (np.uint64(step) << np.uint64(32)) + np.arange(n, dtype=np.uint64))


def cd_step(model, x, y, cfg, step=0, y_neg=None):
    """One CD-k gradient estimate.

    Returns ``(grads, metrics)`` where grads estimate the gradient of
    ``E_data[F] - E_model[F] + penalty`` and F is the free energy. ``y_neg``
    overrides the negative-phase samples (test hook).
    """
    x = np.asarray(x, dtype=model.dtype)
    y = np.asarray(y, dtype=model.dtype)
    if x.shape[0] == 0:
        raise ConfigError("empty batch")
    cond = core.condition(model, x)
    params = cond[0]
    grads = model.zero_grads()
    pos = core.free_energy_backward(model, x, y, +1.0, grads, cond)
    if y_neg is None:
        opts = SampleOptions(cfg.k_steps, final_mean=False, init_mode=cfg.init_mode)
        streams = step_streams(cfg.seed, step, x.shape[0])
        y_neg = sampler.run_chain(params, opts, streams, model.spec.visible_kind,
                                  threads=cfg.threads or None)
    y_neg = np.asarray(y_neg, dtype=model.dtype)
    neg = core.free_energy_backward(model, x, y_neg, -1.0, grads, cond)
    pen = penalty_term(model, cond, cfg, grads)
    grads.check_finite()
    metrics = {
        "pos_fe": pos, "neg_fe": neg, "gap": abs(pos - neg), "penalty": pen,
        "grad_norm_theta": grads.theta.norm(), "grad_norm_phi": grads.phi.norm(),
        "grad_norm_psi": grads.psi.norm(),
        "pd_pass_frac": float(np.mean(core.pd_pass_mask(params))),
    }
    return grads, metrics


def apply_update(model, opt, grads, cfg):
    """Adam step, in place on the model's arrays."""
    opt.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1, c2 = 1 - b1**opt.t, 1 - b2**opt.t
    flat_grads = [g for acc in grads for g in acc.grads]
    for (_, p), g, m, v in zip(model.named_params(), flat_grads, opt.m, opt.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= (cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps_opt)).astype(p.dtype)
    return model


@dataclass
class FitResult:
    model: core.NbmModel
    history: list
    opt: OptState
    step: int = 0
    extra: dict = field(default_factory=dict)


def batches_per_epoch(n, batch_size):
    return -(-n // batch_size)


def fit(model, dataset, cfg, metrics_path=None, opt=None, start_step=0, on_step=None):
    """Train ``model`` in place; returns a :class:`FitResult`.

    Shuffling is seeded per epoch, so a run resumed at ``start_step`` with the
    saved optimiser state continues exactly where it stopped.
    """
    if dataset.kind != model.spec.visible_kind:
        raise ConfigError(f"dataset kind {dataset.kind} != model kind {model.spec.visible_kind}")
    x_all = np.asarray(dataset.x, dtype=model.dtype)
    y_all = np.asarray(dataset.y, dtype=model.dtype)
    n = x_all.shape[0]
    per_epoch = batches_per_epoch(n, cfg.batch_size)
    total = cfg.epochs * per_epoch
    if cfg.max_steps:
        total = min(total, cfg.max_steps)
    opt = opt or OptState.for_model(model)
    history = []
    writer = None
    fh = None
    if metrics_path is not None:
        new = start_step == 0
        fh = open(metrics_path, "w" if new else "a", newline="")
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        if new:
            writer.writeheader()
    step = start_step
    try:
        order = None
        while step < total:
            epoch, b = divmod(step, per_epoch)
            if order is None or b == 0:
                order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
                if dataset.renoise is not None:
                    y_all = np.asarray(dataset.epoch_y(epoch), dtype=model.dtype)
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            try:
                grads, metrics = cd_step(model, x_all[idx], y_all[idx], cfg, step=step)
            except NumericError as exc:
                exc.step = step
                raise
            apply_update(model, opt, grads, cfg)
            step += 1
            row = {"step": step, "epoch": epoch, **metrics}
            history.append(row)
            if writer is not None:
                writer.writerow({k: _fmt(row[k]) for k in METRIC_FIELDS})
            if on_step is not None:
                on_step(step, model, opt)
            if step % 100 == 0:
                log.info("step %d epoch %d gap %.4g penalty %.4g pd %.3f", step, epoch,
                         metrics["gap"], metrics["penalty"], metrics["pd_pass_frac"])
    finally:
        if fh is not None:
            fh.close()
    return FitResult(model, history, opt, step)


def _fmt(v):
    return v if isinstance(v, int) else repr(float(v))


def config_dict(cfg):
    return asdict(cfg)
