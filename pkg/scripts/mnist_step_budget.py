"""How far can the mean network get in a fixed number of Adam steps?

Fits only the mu network (default architecture and init) to the MNIST
fixture by plain squared error, with no sampling noise, for the step count of
a 2-epoch run on 10k images, then prints the per-digit Pearson correlation
between mu(e_d) and the digit's data mean. This bounds what CD training can
reach in the same budget.

    python scripts/mnist_step_budget.py [steps] [seeds]
"""
import sys
from pathlib import Path

import numpy as np

from nbm import core, data, diffnet

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"


def main(steps=158, seeds=3, lr=5e-4, batch=128):
    ds = data.load_image_dataset(DATA / "mnist10k-images-idx3-ubyte.gz",
                                 DATA / "mnist10k-labels-idx1-ubyte.gz")
    labels = ds.meta["labels"]
    means = np.array([ds.y[labels == d].mean(axis=0) for d in range(10)])
    spec = core.default_spec(10, 784)
    for seed in range(seeds):
        net = diffnet.init_mlp(spec.mu_spec, seed)
        params = net.params()
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        rng = np.random.default_rng(seed)
        for t in range(1, steps + 1):
            idx = rng.integers(0, len(ds), batch)
            out, tape = diffnet.forward(net, ds.x[idx])
            acc = diffnet.GradAccum.zeros_like(net)
            diffnet.backward(net, tape, (out - ds.y[idx]) / batch, acc)
            for p, g, mm, vv in zip(params, acc.grads, m, v):
                mm[:] = 0.9 * mm + 0.1 * g
                vv[:] = 0.999 * vv + 0.001 * g * g
                p -= lr * (mm / (1 - 0.9**t)) / (np.sqrt(vv / (1 - 0.999**t)) + 1e-8)
        out, _ = diffnet.forward(net, np.eye(10))
        corr = [np.corrcoef(means[d], out[d])[0, 1] for d in range(10)]
        print(f"seed {seed}: min {min(corr):.3f} mean {np.mean(corr):.3f} "
              f"[{' '.join(f'{c:.2f}' for c in corr)}]")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
