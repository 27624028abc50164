"""Build gzipped IDX files for a 10k-image MNIST subset.

The source is the ``mnist`` npm package (cazala/mnist, v1.1.0), which ships
10000 MNIST digits as JSON arrays of ``pixel / 255`` rounded to 3 decimals.
That rounding is finer than the 1/255 grid, so ``round(v * 255)`` recovers
the original bytes.

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python scripts/make_mnist10k.py package/src/digits tests/data
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np


def main(src, dst):
    images, labels = [], []
    for digit in range(10):
        flat = np.asarray(json.loads((Path(src) / f"{digit}.json").read_text())["data"])
        rows = np.rint(flat.reshape(-1, 784) * 255).astype(np.uint8)
        images.append(rows)
        labels.append(np.full(len(rows), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(0).permutation(len(labels))
    images, labels = images[order], labels[order]
    n = len(labels)
    dst = Path(dst)
    with gzip.GzipFile(dst / "mnist10k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28) + images.tobytes())
    with gzip.GzipFile(dst / "mnist10k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, n) + labels.tobytes())
    print(f"wrote {n} images to {dst}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
