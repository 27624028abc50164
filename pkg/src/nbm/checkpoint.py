"""NBM1 binary checkpoints.

Layout (all integers little-endian)::

    b"NBM1"
    u32   format version
    u32   spec length, then that many bytes of UTF-8 JSON (the NbmSpec)
    u32   array count
    per array:
        u32 name length, name bytes (UTF-8)
        u8  dtype tag (1 float32, 2 float64, 3 int64)
        u8  ndim, then ndim x u64 dims
        raw little-endian payload
    8 bytes  BLAKE2b-64 digest of everything above

Model arrays are named ``theta.W0``, ``psi.b0`` and so on. Training state,
when present, uses the ``opt.`` and ``train.`` prefixes.
"""
import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from . import core, diffnet
from .errors import ConfigError, CorruptCheckpointError, FormatError, VersionError

MAGIC = b"NBM1"
VERSION = 1
DTYPE_TAGS = {np.dtype("<f4"): 1, np.dtype("<f8"): 2, np.dtype("<i8"): 3}
TAG_DTYPES = {v: k for k, v in DTYPE_TAGS.items()}


def _checksum(data):
    return hashlib.blake2b(data, digest_size=8).digest()


def dumps(model, extras=None):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    spec = json.dumps(model.spec.to_dict(), sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(spec)) + spec)
    arrays = list(model.named_params()) + list((extras or {}).items())
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays:
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<")
        if dt not in DTYPE_TAGS:
            raise FormatError(f"unsupported dtype {arr.dtype} for {name}")
        key = name.encode("utf-8")
        buf.write(struct.pack("<I", len(key)) + key)
        buf.write(struct.pack("<BB", DTYPE_TAGS[dt], arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=dt).tobytes())
    body = buf.getvalue()
    return body + _checksum(body)


def save_checkpoint(model, path, extras=None):
    Path(path).write_bytes(dumps(model, extras))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data):
    """Parse checkpoint bytes into ``(model, extras)``."""
    if len(data) < len(MAGIC) + 12 or data[:4] != MAGIC:
        raise FormatError("not an NBM1 checkpoint")
    body, digest = data[:-8], data[-8:]
    if _checksum(body) != digest:
        raise CorruptCheckpointError("checkpoint checksum mismatch")
    r = _Reader(body)
    r.take(4)
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version}")
    (spec_len,) = r.unpack("<I")
    try:
        spec = core.NbmSpec.from_dict(json.loads(r.take(spec_len).decode("utf-8")))
    except (ValueError, KeyError, ConfigError) as exc:
        raise FormatError(f"bad spec header: {exc}") from exc
    (count,) = r.unpack("<I")
    arrays = {}
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        name = r.take(name_len).decode("utf-8")
        tag, ndim = r.unpack("<BB")
        if tag not in TAG_DTYPES:
            raise FormatError(f"unknown dtype tag {tag}")
        dt = TAG_DTYPES[tag]
        shape = r.unpack(f"<{ndim}Q")
        nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        arrays[name] = np.frombuffer(r.take(nbytes), dtype=dt).reshape(shape).copy()
    if r.pos != len(body):
        raise FormatError("trailing bytes after arrays")
    return _build_model(spec, arrays)


def _build_model(spec, arrays):
    nets = []
    for tag, mlp_spec in zip(core.NETWORKS, (spec.mu_spec, spec.logp_spec, spec.w_spec)):
        weights, biases = [], []
        for i, (w_shape, b_shape) in enumerate(mlp_spec.shapes()):
            w = arrays.pop(f"{tag}.W{i}", None)
            b = arrays.pop(f"{tag}.b{i}", None)
            if w is None or b is None:
                raise FormatError(f"missing parameters for {tag} layer {i}")
            if w.shape != w_shape or b.shape != b_shape:
                raise FormatError(f"{tag} layer {i}: shapes {w.shape}/{b.shape} do not match "
                                  f"spec {w_shape}/{b_shape}")
            weights.append(w)
            biases.append(b)
        nets.append(diffnet.Mlp(mlp_spec, weights, biases))
    dtypes = {net.dtype for net in nets}
    if len(dtypes) != 1:
        raise FormatError("parameter arrays have mixed dtypes")
    return core.NbmModel(spec, *nets), arrays


def load_checkpoint(path):
    """Model only; see :func:`load_training_state` for optimiser extras."""
    return loads(Path(path).read_bytes())[0]


def load_training_state(path):
    return loads(Path(path).read_bytes())
