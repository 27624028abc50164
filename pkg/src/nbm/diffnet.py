"""Dense feed-forward networks with hand-written reverse-mode gradients.

Only sequential MLPs are supported: each layer is ``act(x @ W.T + b)``.
Rows are samples. Gradients land in a :class:`GradAccum`, which is signed so
that a positive and a negative phase can share one accumulator.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    layer_dims: tuple
    activations: tuple

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        object.__setattr__(self, "activations", tuple(self.activations))
        self.validate()

    def validate(self):
        if len(self.layer_dims) != len(self.activations):
            raise ConfigError("one activation is required per layer")
        if not self.layer_dims:
            raise ConfigError("an MLP needs at least one layer")
        if self.in_dim < 1 or any(d < 1 for d in self.layer_dims):
            raise ConfigError(f"all dims must be >= 1, got in={self.in_dim} layers={self.layer_dims}")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {a!r}")

    @property
    def out_dim(self):
        return self.layer_dims[-1]

    def shapes(self):
        """(weight_shape, bias_shape) per layer."""
        dims = (self.in_dim,) + self.layer_dims
        return [((dims[i + 1], dims[i]), (dims[i + 1],)) for i in range(len(self.layer_dims))]

    def to_dict(self):
        return {"in_dim": self.in_dim, "layer_dims": list(self.layer_dims),
                "activations": list(self.activations)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["in_dim"]), tuple(d["layer_dims"]), tuple(d["activations"]))


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list
    biases: list

    @property
    def dtype(self):
        return self.weights[0].dtype

    def params(self):
        """Parameters in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def param_names(self):
        names = []
        for i in range(len(self.weights)):
            names += [f"W{i}", f"b{i}"]
        return names

    def astype(self, dtype):
        return Mlp(self.spec, [w.astype(dtype) for w in self.weights],
                   [b.astype(dtype) for b in self.biases])

    def copy(self):
        return self.astype(self.dtype)


@dataclass
class Tape:
    """Cached layer inputs and outputs from one forward call."""
    inputs: list
    outputs: list


@dataclass
class GradAccum:
    """Parameter-shaped gradient sums for one :class:`Mlp`."""
    grads: list
    sample_count: int = 0

    @classmethod
    def zeros_like(cls, mlp):
        return cls([np.zeros_like(p) for p in mlp.params()])

    def zero(self):
        for g in self.grads:
            g.fill(0)
        self.sample_count = 0

    def merge(self, other):
        for g, o in zip(self.grads, other.grads):
            g += o
        self.sample_count += other.sample_count
        return self

    def scale(self, c):
        for g in self.grads:
            g *= c
        return self

    def norm(self):
        return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in self.grads)))

    def is_finite(self):
        return all(np.all(np.isfinite(g)) for g in self.grads)

    def copy(self):
        return GradAccum([g.copy() for g in self.grads], self.sample_count)


def init_mlp(spec, seed, dtype=np.float32):
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases."""
    spec.validate()
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for w_shape, b_shape in spec.shapes():
        bound = 1.0 / np.sqrt(w_shape[1])
        weights.append(rng.uniform(-bound, bound, size=w_shape).astype(dtype))
        biases.append(np.zeros(b_shape, dtype=dtype))
    return Mlp(spec, weights, biases)


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name, z, a, upstream):
    if name == "relu":
        # subgradient 0 at the kink
        return upstream * (z > 0)
    if name == "tanh":
        return upstream * (1 - a * a)
    return upstream


def forward(mlp, x):
    x = np.asarray(x, dtype=mlp.dtype)
    if x.ndim != 2 or x.shape[1] != mlp.spec.in_dim:
        raise ShapeError(f"expected input of shape (n, {mlp.spec.in_dim}), got {x.shape}")
    inputs, outputs = [], []
    h = x
    for w, b, act in zip(mlp.weights, mlp.biases, mlp.spec.activations):
        inputs.append(h)
        with np.errstate(over="ignore", invalid="ignore"):
            # non-finite values are reported by check_finite downstream
            z = h @ w.T + b
            h = _activate(act, z)
        outputs.append((z, h))
    return h, Tape(inputs, outputs)


def backward(mlp, tape, upstream, accum, sign=1.0):
    """Accumulate ``sign * d(sum_rows <upstream, out>)/d(params)``; return d/dx."""
    upstream = np.asarray(upstream, dtype=mlp.dtype)
    n = tape.inputs[0].shape[0]
    if upstream.shape != (n, mlp.spec.out_dim):
        raise ShapeError(f"upstream shape {upstream.shape} does not match output ({n}, {mlp.spec.out_dim})")
    g = upstream
    for i in reversed(range(len(mlp.weights))):
        z, a = tape.outputs[i]
        g = _activation_grad(mlp.spec.activations[i], z, a, g)
        gw = g.T @ tape.inputs[i]
        gb = g.sum(axis=0)
        if sign == 1:
            accum.grads[2 * i] += gw
            accum.grads[2 * i + 1] += gb
        else:
            accum.grads[2 * i] += sign * gw
            accum.grads[2 * i + 1] += sign * gb
        g = g @ mlp.weights[i]
    accum.sample_count += n
    return g


def check_finite(arr, network, what):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite {what} in network {network}", network=network)
