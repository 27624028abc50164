"""Block Gibbs sampling of p(y, h | x).

All functions operate on a batch of chains: ``y`` is (n_chains, n_y) and the
``CondParams`` either carry the same leading batch dim or are unbatched and
broadcast across chains. Randomness comes from a :class:`Streams` object, one
counter-based stream per chain.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import CounterRNG


class Streams:
    """Per-chain random streams sharing one seed and one draw counter."""

    def __init__(self, seed, stream_ids, counter=0):
        self.rng = seed if isinstance(seed, CounterRNG) else CounterRNG(seed)
        self.ids = np.asarray(stream_ids, dtype=np.uint64).reshape(-1)
        self.counter = counter

    def __len__(self):
        return self.ids.size

    def uniform(self, n):
        u = self.rng.uniform(self.ids, self.counter, n)
        self.counter += 1
        return u

    def normal(self, n):
        z = self.rng.normal(self.ids, self.counter, n)
        self.counter += 1
        return z

    def subset(self, idx):
        return Streams(self.rng, self.ids[idx], self.counter)


@dataclass
class SampleOptions:
    k_steps: int = 32
    final_mean: bool = False
    init_mode: str = "draw"

    def __post_init__(self):
        if self.k_steps < 1:
            raise ConfigError("k_steps must be >= 1")
        if self.init_mode not in ("draw", "mean"):
            raise ConfigError("init_mode must be 'draw' or 'mean'")


@dataclass
class GibbsChain:
    y: np.ndarray
    h: np.ndarray
    streams: Streams


def _vec_mat(v, m):
    """v' m over trailing dims, batched (BLAS-backed)."""
    return (v[..., None, :] @ m)[..., 0, :]


def _mat_vec(m, v):
    return (m @ v[..., None])[..., 0]


def spin_prob(field):
    """P(s = +1) for a +-1 spin in ``field``: e^a / (e^a + e^-a)."""
    return 0.5 * (1.0 + np.tanh(field))


def _spins(field, streams):
    u = streams.uniform(field.shape[-1])
    return np.where(u < spin_prob(np.asarray(field, np.float64)), 1.0, -1.0).astype(field.dtype)


def sample_hidden(p, y, streams):
    field = _vec_mat(y - p.mu, p.w)
    return _spins(np.broadcast_to(field, (len(streams), p.n_h)), streams)


def visible_mean_gaussian(p, h):
    return p.mu + _mat_vec(p.w, h) / p.prec


def visible_field_ising(p, h):
    return p.prec * p.mu + _mat_vec(p.w, h)


def sample_visible_gaussian(p, h, streams):
    mean = np.broadcast_to(visible_mean_gaussian(p, h), (len(streams), p.n_y))
    z = streams.normal(p.n_y).astype(mean.dtype)
    return mean + z / np.sqrt(p.prec)


def sample_visible_ising(p, h, streams):
    field = np.broadcast_to(visible_field_ising(p, h), (len(streams), p.n_y))
    return _spins(field, streams)


def sample_visible(p, h, streams, kind):
    if kind == "gaussian":
        return sample_visible_gaussian(p, h, streams)
    return sample_visible_ising(p, h, streams)


def visible_mean(p, h, kind):
    if kind == "gaussian":
        return visible_mean_gaussian(p, h)
    return np.tanh(visible_field_ising(p, h))


def init_chain(p, streams, kind, mode="draw"):
    """Start from the visible conditional with no hidden contribution."""
    shape = (len(streams), p.n_y)
    if mode == "mean":
        y0 = p.mu if kind == "gaussian" else np.tanh(p.prec * p.mu)
        return np.array(np.broadcast_to(y0, shape))
    if kind == "gaussian":
        z = streams.normal(p.n_y).astype(p.mu.dtype)
        return np.broadcast_to(p.mu, shape) + z / np.sqrt(p.prec)
    return _spins(np.broadcast_to(p.prec * p.mu, shape), streams)


def _run(p, opts, streams, kind):
    y = init_chain(p, streams, kind, opts.init_mode)
    for step in range(opts.k_steps):
        h = sample_hidden(p, y, streams)
        if opts.final_mean and step == opts.k_steps - 1:
            y = np.array(np.broadcast_to(visible_mean(p, h, kind), y.shape))
        else:
            y = sample_visible(p, h, streams, kind)
    return GibbsChain(y, h, streams)


def thread_count():
    try:
        return max(1, int(os.environ.get("NBM_THREADS", "1")))
    except ValueError:
        return 1


def run_chain(p, opts, streams, kind, threads=None):
    """k block Gibbs sweeps per chain; returns the final visible batch.

    Chains are split into contiguous shards when ``threads`` > 1. Draws
    depend only on each chain's stream id, so the result is identical for
    any thread count.
    """
    threads = thread_count() if threads is None else threads
    n = len(streams)
    if threads <= 1 or n < 2 * threads:
        chain = _run(p, opts, streams, kind)
        streams.counter = chain.streams.counter
        return chain.y
    batched = np.ndim(p.mu) == 2
    bounds = np.linspace(0, n, threads + 1).astype(int)
    shards = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def work(s):
        return _run(p[s] if batched else p, opts, streams.subset(s), kind)

    with ThreadPoolExecutor(threads) as pool:
        chains = list(pool.map(work, shards))
    streams.counter = chains[0].streams.counter
    return np.concatenate([c.y for c in chains])
