"""Neural Boltzmann Machine: parameter networks, energy and free energy.

Three networks map the conditioning input ``x`` to the parameters of a
Gaussian (or Ising) visible / Ising hidden RBM:

* ``mu_net``   (theta) -> mean ``mu``, optionally squashed by tanh
* ``logp_net`` (phi)   -> log of the diagonal precision ``prec``
* ``w_net``    (psi)   -> coupling matrix ``w`` of shape (n_y, n_h), scaled
  by ``1/sqrt(n_y)``

Energy and free energy functions broadcast over any leading batch dims.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import diffnet
from .diffnet import GradAccum, MlpSpec
from .errors import ConfigError, NumericError, ShapeError

NETWORKS = ("theta", "phi", "psi")
VISIBLE_KINDS = ("gaussian", "ising")
LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class NbmSpec:
    n_x: int
    n_y: int
    n_h: int
    visible_kind: str
    mu_spec: MlpSpec
    logp_spec: MlpSpec
    w_spec: MlpSpec
    tanh_bias: bool = False
    weight_scaling: bool = True

    def __post_init__(self):
        if self.visible_kind not in VISIBLE_KINDS:
            raise ConfigError(f"visible_kind must be one of {VISIBLE_KINDS}")
        if min(self.n_x, self.n_y, self.n_h) < 1:
            raise ConfigError("n_x, n_y and n_h must be >= 1")
        for name, spec, out in (("mu_spec", self.mu_spec, self.n_y),
                                ("logp_spec", self.logp_spec, self.n_y),
                                ("w_spec", self.w_spec, self.n_y * self.n_h)):
            if spec.in_dim != self.n_x:
                raise ConfigError(f"{name} input dim {spec.in_dim} != n_x {self.n_x}")
            if spec.out_dim != out:
                raise ConfigError(f"{name} output dim {spec.out_dim} != {out}")
        if self.visible_kind == "ising" and not self.tanh_bias:
            raise ConfigError("ising visibles require tanh_bias=True")

    @property
    def w_scale(self):
        return 1.0 / np.sqrt(self.n_y) if self.weight_scaling else 1.0

    def to_dict(self):
        return {
            "n_x": self.n_x, "n_y": self.n_y, "n_h": self.n_h,
            "visible_kind": self.visible_kind,
            "mu_spec": self.mu_spec.to_dict(),
            "logp_spec": self.logp_spec.to_dict(),
            "w_spec": self.w_spec.to_dict(),
            "tanh_bias": self.tanh_bias,
            "weight_scaling": self.weight_scaling,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n_x"]), int(d["n_y"]), int(d["n_h"]), d["visible_kind"],
                   MlpSpec.from_dict(d["mu_spec"]), MlpSpec.from_dict(d["logp_spec"]),
                   MlpSpec.from_dict(d["w_spec"]), bool(d["tanh_bias"]),
                   bool(d.get("weight_scaling", True)))


def default_spec(n_x, n_y, n_h=64, visible_kind="gaussian", hidden=32,
                 tanh_bias=None, weight_scaling=True):
    """Two-layer ReLU nets for mean and log-precision, one affine layer for W."""
    if tanh_bias is None:
        tanh_bias = visible_kind == "ising"
    two_layer = MlpSpec(n_x, (hidden, n_y), ("relu", "identity"))
    return NbmSpec(n_x, n_y, n_h, visible_kind, two_layer, two_layer,
                   MlpSpec(n_x, (n_y * n_h,), ("identity",)), tanh_bias, weight_scaling)


@dataclass
class NbmModel:
    spec: NbmSpec
    mu_net: diffnet.Mlp
    logp_net: diffnet.Mlp
    w_net: diffnet.Mlp

    @property
    def nets(self):
        return (self.mu_net, self.logp_net, self.w_net)

    @property
    def dtype(self):
        return self.mu_net.dtype

    def astype(self, dtype):
        return NbmModel(self.spec, *(net.astype(dtype) for net in self.nets))

    def copy(self):
        return self.astype(self.dtype)

    def named_params(self):
        """(name, array) pairs, e.g. ``("theta.W0", ...)``."""
        out = []
        for tag, net in zip(NETWORKS, self.nets):
            out += [(f"{tag}.{n}", p) for n, p in zip(net.param_names(), net.params())]
        return out

    def zero_grads(self):
        return NbmGrads(*(GradAccum.zeros_like(net) for net in self.nets))


def init_model(spec, seed, dtype=np.float32):
    seeds = np.random.SeedSequence(seed).generate_state(3)
    return NbmModel(spec, diffnet.init_mlp(spec.mu_spec, int(seeds[0]), dtype),
                    diffnet.init_mlp(spec.logp_spec, int(seeds[1]), dtype),
                    diffnet.init_mlp(spec.w_spec, int(seeds[2]), dtype))


@dataclass
class NbmGrads:
    theta: GradAccum
    phi: GradAccum
    psi: GradAccum

    def __iter__(self):
        return iter((self.theta, self.phi, self.psi))

    def merge(self, other):
        for a, b in zip(self, other):
            a.merge(b)
        return self

    def copy(self):
        return NbmGrads(*(g.copy() for g in self))

    def flat(self):
        return np.concatenate([g.ravel() for acc in self for g in acc.grads])

    def check_finite(self):
        for name, acc in zip(NETWORKS, self):
            if not acc.is_finite():
                raise NumericError(f"non-finite gradient for network {name}", network=name)


@dataclass
class CondParams:
    """RBM parameters instantiated at one (or a batch of) conditioning inputs.

    ``w`` already includes the ``1/sqrt(n_y)`` factor.
    """
    mu: np.ndarray
    prec: np.ndarray
    w: np.ndarray

    @property
    def n_y(self):
        return self.w.shape[-2]

    @property
    def n_h(self):
        return self.w.shape[-1]

    def __getitem__(self, idx):
        return CondParams(self.mu[idx], self.prec[idx], self.w[idx])

    def astype(self, dtype):
        return CondParams(self.mu.astype(dtype), self.prec.astype(dtype), self.w.astype(dtype))


@dataclass
class CondCache:
    """Tapes and raw network outputs kept for the backward pass."""
    x: np.ndarray
    tapes: tuple
    params: CondParams


def condition(model, x):
    """Run the three networks on ``x`` (n, n_x); return (CondParams, cache)."""
    spec = model.spec
    x = np.asarray(x, dtype=model.dtype)
    if x.ndim != 2 or x.shape[1] != spec.n_x:
        raise ShapeError(f"x must have shape (n, {spec.n_x}), got {x.shape}")
    mu_raw, t_mu = diffnet.forward(model.mu_net, x)
    logp, t_p = diffnet.forward(model.logp_net, x)
    w_raw, t_w = diffnet.forward(model.w_net, x)
    for raw, name in ((mu_raw, "theta"), (logp, "phi"), (w_raw, "psi")):
        diffnet.check_finite(raw, name, "output")
    mu = np.tanh(mu_raw) if spec.tanh_bias else mu_raw
    with np.errstate(over="ignore"):
        prec = np.exp(logp)
    diffnet.check_finite(prec, "phi", "precision")
    w = w_raw.reshape(x.shape[0], spec.n_y, spec.n_h) * model.dtype.type(spec.w_scale)
    params = CondParams(mu, prec, w)
    return params, CondCache(x, (t_mu, t_p, t_w), params)


def cond_backward(model, cache, g_mu, g_prec, g_w, grads, sign=1.0):
    """Chain gradients w.r.t. (mu, prec, w) back into the three networks."""
    spec = model.spec
    p = cache.params
    n = cache.x.shape[0]
    if spec.tanh_bias:
        g_mu = g_mu * (1 - p.mu * p.mu)
    g_logp = g_prec * p.prec
    g_wraw = (g_w * spec.w_scale).reshape(n, spec.n_y * spec.n_h)
    for net, tape, g, acc in zip(model.nets, cache.tapes, (g_mu, g_logp, g_wraw), grads):
        diffnet.backward(net, tape, g, acc, sign)


def log_cosh(a):
    """Overflow-safe log(cosh(a))."""
    a = np.abs(a)
    return a + np.log1p(np.exp(-2 * a)) - LOG2


def energy(p, y, h):
    """Joint energy U(y, h | x)."""
    d = y - p.mu
    quad = 0.5 * np.sum(p.prec * d * d, axis=-1)
    return quad - np.einsum("...i,...ij,...j->...", d, p.w, h)


def _vec_mat(v, m):
    return (v[..., None, :] @ m)[..., 0, :]


def _mat_vec(m, v):
    return (m @ v[..., None])[..., 0]


def hidden_field(p, y):
    """W'(y - mu), the field on the hidden spins."""
    return _vec_mat(y - p.mu, p.w)


def free_energy(p, y):
    """Free energy with the hidden spins summed out."""
    d = y - p.mu
    quad = 0.5 * np.sum(p.prec * d * d, axis=-1)
    return quad - np.sum(log_cosh(_vec_mat(d, p.w)), axis=-1)


def free_energy_grad_y(p, y):
    """d/dy of the free energy: P(y - mu) - W tanh(W'(y - mu))."""
    d = y - p.mu
    t = np.tanh(_vec_mat(d, p.w))
    return p.prec * d - _mat_vec(p.w, t)


def free_energy_param_grads(p, y):
    """Per-row gradients of the free energy w.r.t. (mu, prec, w)."""
    d = y - p.mu
    t = np.tanh(_vec_mat(d, p.w))
    g_mu = -p.prec * d + _mat_vec(p.w, t)
    g_prec = 0.5 * d * d
    g_w = -d[..., :, None] * t[..., None, :]
    return g_mu, g_prec, g_w


def free_energy_backward(model, x, y, sign, grads, cond=None):
    """Accumulate ``sign * d(mean free energy)/d(theta, phi, psi)``.

    ``cond`` may carry a precomputed ``(params, cache)`` for ``x``.
    Returns the mean free energy of the batch.
    """
    params, cache = cond if cond is not None else condition(model, x)
    y = np.asarray(y, dtype=model.dtype)
    if y.shape != params.mu.shape:
        raise ShapeError(f"y shape {y.shape} does not match batch params {params.mu.shape}")
    n = y.shape[0]
    g_mu, g_prec, g_w = free_energy_param_grads(params, y)
    inv_n = model.dtype.type(1.0 / n)
    cond_backward(model, cache, g_mu * inv_n, g_prec * inv_n, g_w * inv_n, grads, sign)
    grads.check_finite()
    return float(np.mean(free_energy(params, y)))


def pd_diagnostic(p):
    """Smallest eigenvalue of diag(prec) - W W' and whether it is PD."""
    w = np.asarray(p.w, dtype=np.float64)
    m = np.diag(np.asarray(p.prec, dtype=np.float64)) - w @ w.T
    min_eig = float(np.linalg.eigvalsh(m)[0])
    try:
        np.linalg.cholesky(m)
        is_pd = True
    except np.linalg.LinAlgError:
        is_pd = False
    return min_eig, is_pd


def pd_pass_mask(p):
    """Batched PD test of diag(prec) - W W', one flag per row.

    With S = P^-1/2 W the matrix is PD exactly when every eigenvalue of
    S S' (equivalently S' S) is below 1, so the smaller of the two
    Gram matrices is used.
    """
    w = np.asarray(p.w, dtype=np.float64)
    s = w / np.sqrt(np.asarray(p.prec, dtype=np.float64))[..., None]
    st = np.swapaxes(s, -1, -2)
    m = st @ s if p.n_h <= p.n_y else s @ st
    return np.linalg.eigvalsh(m)[..., -1] < 1.0


def with_zero_weights(model):
    """Copy of ``model`` whose W network outputs exactly zero."""
    w_net = model.w_net.copy()
    for arr in w_net.params():
        arr.fill(0)
    return replace(model, w_net=w_net)
