"""Training experiments shared by the acceptance and trainer tests."""
import time

import numpy as np

from nbm import cli, core, data, sampler, trainer
from nbm.sampler import SampleOptions, Streams

from conftest import MNIST_IMAGES, MNIST_LABELS, SYNTH_MEANS, SYNTH_VARS

# n_h for the low-dimensional synthetic tasks (the MNIST run keeps 64)
SYNTH_HIDDEN = 16


def run_synth_classes(weight_scaling=True, seed=0, steps=2000):
    t0 = time.perf_counter()
    ds = data.synth_gaussian_classes(data.SynthSpec(SYNTH_MEANS, SYNTH_VARS), seed)
    spec = core.default_spec(3, 4, n_h=SYNTH_HIDDEN, weight_scaling=weight_scaling)
    model = core.init_model(spec, seed)
    cfg = trainer.TrainConfig(max_steps=steps, seed=seed)
    res = trainer.fit(model, ds, cfg)
    p, _ = core.condition(model, np.eye(3))
    per_epoch = trainer.batches_per_epoch(len(ds), cfg.batch_size)
    return {
        "model": model,
        "history": res.history,
        "mu_err": float(np.max(np.abs(p.mu - np.array(SYNTH_MEANS)))),
        "var_rel_err": float(np.max(np.abs((1 / p.prec) / np.array(SYNTH_VARS) - 1))),
        "pd_final_epoch": float(np.mean([h["pd_pass_frac"] for h in res.history[-per_epoch:]])),
        "seconds": time.perf_counter() - t0,
    }


def run_bimodal(seed=0, steps=3000, n_samples=10_000):
    t0 = time.perf_counter()
    ds = data.synth_bimodal(data.SynthSpec(center=2.0, n_y=2), seed)
    model = core.init_model(core.default_spec(1, 2, n_h=SYNTH_HIDDEN), seed)
    trainer.fit(model, ds, trainer.TrainConfig(max_steps=steps, seed=seed))
    p, _ = core.condition(model, np.ones((1, 1)))
    y = sampler.run_chain(p[0], SampleOptions(32), Streams(seed + 1, np.arange(n_samples)), "gaussian")
    return {
        "split": float(np.mean(y[:, 0] > 0)),
        "near_saddle": float(np.mean(np.linalg.norm(y, axis=1) < 0.5)),
        "seconds": time.perf_counter() - t0,
    }


def run_mnist(out_dir, epochs=2, seed=0):
    t0 = time.perf_counter()
    ds = data.load_image_dataset(MNIST_IMAGES, MNIST_LABELS, kind="gaussian")
    model = core.init_model(core.default_spec(10, 784), seed)
    trainer.fit(model, ds, trainer.TrainConfig(epochs=epochs, seed=seed))
    labels = ds.meta["labels"]
    means = np.array([ds.y[labels == d].mean(axis=0) for d in range(10)])
    gen = cli.generate(model, list(range(10)), 1, 32, True, seed)[:, 0]
    corr = [float(np.corrcoef(means[d], gen[d])[0, 1]) for d in range(10)]
    ckpt = out_dir / "mnist.nbm"
    from nbm import checkpoint
    checkpoint.save_checkpoint(model, ckpt)
    return {"corr": corr, "ckpt": ckpt, "seconds": time.perf_counter() - t0}
