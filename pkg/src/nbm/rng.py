"""Counter-based random streams built on Philox4x32-10.

Every random number is a pure function of ``(seed, stream, counter, slot)``,
so a batch of chains produces the same per-chain draws no matter how the
batch is split across threads or calls.
"""
import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(ctr, key, rounds=10):
    """Vectorised Philox4x32 block function.

    Args:
        ctr: uint32-valued array of shape (..., 4).
        key: pair of ints (k0, k1).

    Returns:
        uint32 array of shape (..., 4).
    """
    ctr = np.asarray(ctr, dtype=np.uint64)
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for _ in range(rounds):
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT) ^ c1 ^ np.uint64(k0),
            p1 & _MASK,
            (p0 >> _SHIFT) ^ c3 ^ np.uint64(k1),
            p0 & _MASK,
        )
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _philox_fill_py(streams, counter, n_blocks, k0, k1):
    ctr = np.empty((streams.size, n_blocks, 4), dtype=np.uint64)
    ctr[..., 0] = np.arange(n_blocks, dtype=np.uint64)
    ctr[..., 1] = np.uint64(counter)
    ctr[..., 2] = (streams & _MASK)[:, None]
    ctr[..., 3] = (streams >> _SHIFT)[:, None]
    return philox4x32(ctr, (k0, k1)).reshape(streams.size, n_blocks * 4)


if numba is not None:
    @numba.njit(cache=True, nogil=True)
    def _philox_fill_nb(streams, counter, n_blocks, k0, k1):
        out = np.empty((streams.size, n_blocks * 4), dtype=np.uint32)
        mask = np.uint64(0xFFFFFFFF)
        for s in range(streams.size):
            sid = streams[s]
            for b in range(n_blocks):
                c0 = np.uint64(b)
                c1 = np.uint64(counter)
                c2 = sid & mask
                c3 = sid >> np.uint64(32)
                ka = np.uint64(k0)
                kb = np.uint64(k1)
                for _ in range(10):
                    p0 = c0 * np.uint64(0xD2511F53)
                    p1 = c2 * np.uint64(0xCD9E8D57)
                    c0 = (p1 >> np.uint64(32)) ^ c1 ^ ka
                    c1 = p1 & mask
                    c2 = (p0 >> np.uint64(32)) ^ c3 ^ kb
                    c3 = p0 & mask
                    ka = (ka + np.uint64(0x9E3779B9)) & mask
                    kb = (kb + np.uint64(0xBB67AE85)) & mask
                out[s, 4 * b] = np.uint32(c0)
                out[s, 4 * b + 1] = np.uint32(c1)
                out[s, 4 * b + 2] = np.uint32(c2)
                out[s, 4 * b + 3] = np.uint32(c3)
        return out

    _philox_fill = _philox_fill_nb
else:  # pragma: no cover
    _philox_fill = _philox_fill_py


class CounterRNG:
    """Philox streams keyed by a 64-bit seed.

    A stream id is a 64-bit integer (one per chain). Each draw call uses a
    caller-supplied ``counter`` so that distinct calls never overlap.
    """

    def __init__(self, seed):
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.seed = seed
        self.key = (seed & 0xFFFFFFFF, seed >> 32)

    def bits(self, streams, counter, n):
        """Raw uint32 words, shape (len(streams), n)."""
        streams = np.asarray(streams, dtype=np.uint64).reshape(-1)
        out = _philox_fill(streams, int(counter) & 0xFFFFFFFF, -(-n // 4), *self.key)
        return out[:, :n]

    def uniform(self, streams, counter, n):
        """Uniforms on the open interval (0, 1), float64."""
        return (self.bits(streams, counter, n).astype(np.float64) + 0.5) * 2.0**-32

    def normal(self, streams, counter, n):
        """Standard normals by Box-Muller, two per uniform pair."""
        half = -(-n // 2)
        u = self.uniform(streams, counter, 2 * half)
        r = np.sqrt(-2.0 * np.log(u[:, :half]))
        t = 2.0 * np.pi * u[:, half:]
        z = np.concatenate([r * np.cos(t), r * np.sin(t)], axis=1)
        return z[:, :n]
