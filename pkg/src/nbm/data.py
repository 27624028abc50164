"""IDX loading, image preprocessing and synthetic conditional datasets."""
import gzip
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, LengthError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
NOISE_VAR = 0.001


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)
    # per-epoch re-noising: (clean_y, noise_var, seed)
    renoise: tuple = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "ising"):
            raise DataError(f"unknown visible kind {self.kind!r}")
        if self.x.ndim != 2 or self.y.ndim != 2 or len(self.x) != len(self.y):
            raise DataError(f"x {self.x.shape} and y {self.y.shape} must be 2-d with equal rows")
        if self.kind == "ising" and not np.all(np.abs(self.y) == 1):
            raise DataError("ising visibles must be +-1")

    def __len__(self):
        return self.x.shape[0]

    def epoch_y(self, epoch):
        if self.renoise is None:
            return self.y
        clean, var, seed = self.renoise
        rng = np.random.default_rng([seed, epoch])
        return clean + rng.normal(0.0, np.sqrt(var), size=clean.shape)


@dataclass
class SynthSpec:
    class_means: list = None
    class_variances: list = None
    samples_per_class: int = 2000
    center: float = 2.0
    n_y: int = 2
    mode_var: float = 0.05
    n_samples: int = 10000

    def validate(self):
        if self.samples_per_class < 1 or self.n_samples < 1:
            raise DataError("sample counts must be >= 1")
        if self.class_variances is not None:
            if np.any(np.asarray(self.class_variances, dtype=float) <= 0):
                raise DataError("class variances must be positive")


def _read_bytes(path):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except EOFError as exc:
            raise LengthError(f"{path}: truncated gzip stream") from exc
        except (gzip.BadGzipFile, zlib.error) as exc:
            raise FormatError(f"{path}: corrupt gzip stream") from exc
    return raw


def load_idx(path):
    """Parse a big-endian IDX file (optionally gzipped) into a uint8 array.

    Images (magic 0x803) come back as (n, rows, cols); labels (0x801) as (n,).
    """
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise LengthError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic == IMAGE_MAGIC:
        ndim = 3
    elif magic == LABEL_MAGIC:
        ndim = 1
    else:
        raise FormatError(f"{path}: bad IDX magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise LengthError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    payload = raw[header:]
    if len(payload) < count:
        raise LengthError(f"{path}: expected {count} payload bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8, count=count).reshape(dims)


def write_idx(path, arr):
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    magic = IMAGE_MAGIC if arr.ndim == 3 else LABEL_MAGIC
    header = struct.pack(f">I{arr.ndim}I", magic, *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def preprocess_gaussian(images, noise_seed, noise_var=NOISE_VAR):
    """Map pixels to [-0.5, 0.5], flatten, add N(0, noise_var) noise."""
    images = np.asarray(images)
    y = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0 - 0.5
    if noise_var > 0:
        y += np.random.default_rng(noise_seed).normal(0.0, np.sqrt(noise_var), size=y.shape)
    return y


def preprocess_ising(images, threshold=0.5):
    images = np.asarray(images)
    flat = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return np.where(flat > threshold, 1.0, -1.0)


def one_hot(labels, n_classes=10):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes})")
    x = np.zeros((labels.size, n_classes))
    x[np.arange(labels.size), labels] = 1.0
    return x


def load_image_dataset(images_path, labels_path, kind="gaussian", limit=0, noise_seed=0,
                       threshold=0.5, noise_mode="static", n_classes=10):
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise FormatError("expected an image file and a label file")
    if len(images) != len(labels):
        raise DataError(f"{len(images)} images but {len(labels)} labels")
    if limit:
        images, labels = images[:limit], labels[:limit]
    meta = {"source": str(images_path), "labels": labels}
    x = one_hot(labels, n_classes)
    if kind == "ising":
        return Dataset(x, preprocess_ising(images, threshold), kind, meta)
    if noise_mode == "per_epoch":
        clean = preprocess_gaussian(images, noise_seed, noise_var=0.0)
        return Dataset(x, clean, kind, meta, renoise=(clean, NOISE_VAR, noise_seed))
    return Dataset(x, preprocess_gaussian(images, noise_seed), kind, meta)


def synth_gaussian_classes(spec, seed):
    """Class c draws y ~ N(m_c, diag(v_c)) with x = one_hot(c)."""
    spec.validate()
    means = np.asarray(spec.class_means, dtype=np.float64)
    variances = np.asarray(spec.class_variances, dtype=np.float64)
    n_classes, n_y = means.shape
    rng = np.random.default_rng(seed)
    n = spec.samples_per_class
    y = np.concatenate([rng.normal(means[c], np.sqrt(variances[c]), size=(n, n_y))
                        for c in range(n_classes)])
    labels = np.repeat(np.arange(n_classes), n)
    return Dataset(one_hot(labels, n_classes), y, "gaussian",
                   {"source": "synth_gaussian_classes", "labels": labels,
                    "means": means, "variances": variances})


def synth_bimodal(spec, seed):
    """Single class; y is an even mixture of N(+c, v I) and N(-c, v I)."""
    spec.validate()
    if spec.center < 0:
        raise DataError("center must be >= 0")
    rng = np.random.default_rng(seed)
    n = spec.n_samples
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y = signs[:, None] * spec.center + rng.normal(0.0, np.sqrt(spec.mode_var), size=(n, spec.n_y))
    return Dataset(np.ones((n, 1)), y, "gaussian",
                   {"source": "synth_bimodal", "signs": signs, "center": spec.center})
