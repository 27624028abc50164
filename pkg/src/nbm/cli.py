"""``nbm`` command-line entry point.

Exit codes: 0 ok, 1 check failure, 2 config error, 3 numeric error,
4 checkpoint error.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint, checks, config, core, data, pgm, sampler, trainer
from .errors import CheckpointError, ConfigError, DataError, FormatError, NumericError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECKPOINT = 0, 1, 2, 3, 4

log = logging.getLogger("nbm")


def parse_labels(text, n_classes):
    if text is None:
        return list(range(n_classes))
    labels = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            labels.extend(range(int(lo), int(hi) + 1))
        elif part:
            labels.append(int(part))
    if not labels or min(labels) < 0 or max(labels) >= n_classes:
        raise ConfigError(f"labels must lie in 0..{n_classes - 1}")
    return labels


def _training_extras(result):
    extras = {"train.step": np.array(result.step, dtype=np.int64),
              "opt.t": np.array(result.opt.t, dtype=np.int64)}
    for (name, _), m, v in zip(result.model.named_params(), result.opt.m, result.opt.v):
        extras[f"opt.m.{name}"] = m
        extras[f"opt.v.{name}"] = v
    return extras


def _restore_opt(model, extras):
    if "opt.t" not in extras:
        return trainer.OptState.for_model(model), int(extras.get("train.step", 0))
    names = [n for n, _ in model.named_params()]
    opt = trainer.OptState([extras[f"opt.m.{n}"] for n in names],
                           [extras[f"opt.v.{n}"] for n in names], int(extras["opt.t"]))
    return opt, int(extras["train.step"])


def cmd_train(args):
    try:
        cfg = config.load(args.config, args.set or ())
        if args.output_dir:
            cfg.output_dir = args.output_dir
        dataset = config.build_dataset(cfg)
        spec = config.build_spec(cfg, dataset)
    except (ConfigError, DataError, FormatError, OSError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    opt, start = None, 0
    if args.resume:
        try:
            model, extras = checkpoint.load_training_state(args.resume)
        except (CheckpointError, FormatError, OSError) as exc:
            log.error("cannot resume: %s", exc)
            return EXIT_CHECKPOINT
        if model.spec != spec:
            log.error("checkpoint spec does not match the config")
            return EXIT_CONFIG
        model = model.astype(cfg.train.np_dtype)
        opt, start = _restore_opt(model, extras)
    else:
        model = core.init_model(spec, cfg.model["init_seed"], dtype=cfg.train.np_dtype)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.toml").write_text(cfg.dumps())
    metrics = out / "metrics.csv"
    if start and not metrics.exists():
        start_fresh_header(metrics)
    state = {"opt": opt or trainer.OptState.for_model(model), "step": start}

    def track(step, _model, opt_state):
        state["step"], state["opt"] = step, opt_state

    try:
        result = trainer.fit(model, dataset, cfg.train, metrics_path=metrics,
                             opt=state["opt"], start_step=start, on_step=track)
    except NumericError as exc:
        log.error("numeric error at step %s: %s", state["step"], exc)
        partial = trainer.FitResult(model, [], state["opt"], state["step"])
        checkpoint.save_checkpoint(model, out / "model.nbm", _training_extras(partial))
        return EXIT_NUMERIC
    checkpoint.save_checkpoint(result.model, out / "model.nbm", _training_extras(result))
    if result.history:
        last = result.history[-1]
        log.info("done: step %d gap %.4g pd_pass %.3f", result.step, last["gap"], last["pd_pass_frac"])
    return EXIT_OK


def start_fresh_header(path):
    with open(path, "w") as fh:
        fh.write(",".join(trainer.METRIC_FIELDS) + "\n")


def _load_model(path):
    return checkpoint.load_checkpoint(path)


def _intensity(values, kind):
    lo, hi = (-0.5, 0.5) if kind == "gaussian" else (-1.0, 1.0)
    return pgm.to_intensity(values, lo, hi)


def generate(model, labels, per_label, k, mean, seed, init_mode="draw"):
    """Samples for each label: array (len(labels), per_label, n_y)."""
    n_x = model.spec.n_x
    x = np.repeat(data.one_hot(labels, n_x), per_label, axis=0)
    params, _ = core.condition(model, x)
    streams = sampler.Streams(seed, np.arange(len(x)))
    y = sampler.run_chain(params, sampler.SampleOptions(k, mean, init_mode), streams,
                          model.spec.visible_kind)
    return y.reshape(len(labels), per_label, -1)


def sample_grid(model, labels, per_label=4, k=32, mean=False, seed=0, init_mode="draw"):
    y = generate(model, labels, per_label, k, mean, seed, init_mode)
    shape = pgm.tile_shape(model.spec.n_y)
    tiles = _intensity(y, model.spec.visible_kind).reshape(len(labels), per_label, *shape)
    return pgm.grid(tiles.transpose(1, 0, 2, 3))


def inspect_grid(model, labels, k=32, seed=0):
    spec = model.spec
    shape = pgm.tile_shape(spec.n_y)
    sampled = generate(model, labels, 1, k, True, seed)[:, 0]
    params, _ = core.condition(model, data.one_hot(labels, spec.n_x))
    rows = [
        [_intensity(s, spec.visible_kind) for s in sampled],
        [_intensity(m, spec.visible_kind) for m in params.mu],
        [pgm.minmax_intensity(1.0 / p) for p in params.prec],
        [pgm.minmax_intensity(w.mean(axis=-1)) for w in params.w],
    ]
    tiles = np.array([[t.reshape(shape) for t in row] for row in rows])
    return pgm.grid(tiles)


def cmd_sample(args):
    try:
        model = _load_model(args.ckpt)
    except (CheckpointError, FormatError, OSError) as exc:
        log.error("bad checkpoint: %s", exc)
        return EXIT_CHECKPOINT
    try:
        labels = parse_labels(args.labels, model.spec.n_x)
        image = sample_grid(model, labels, args.per_label, args.k, args.mean, args.seed, args.init_mode)
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    pgm.write_pgm(args.out, image)
    return EXIT_OK


def cmd_inspect(args):
    try:
        model = _load_model(args.ckpt)
    except (CheckpointError, FormatError, OSError) as exc:
        log.error("bad checkpoint: %s", exc)
        return EXIT_CHECKPOINT
    try:
        labels = parse_labels(args.labels, model.spec.n_x)
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    pgm.write_pgm(args.out, inspect_grid(model, labels, args.k, args.seed))
    return EXIT_OK


def cmd_check(args):
    results = checks.run_suite(fast=args.fast)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def build_parser():
    parser = argparse.ArgumentParser(prog="nbm", description="Neural Boltzmann Machines")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--output-dir")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="write a PGM grid of conditional samples")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--labels", default=None, help="e.g. 0..9 or 1,3,5")
    p.add_argument("--per-label", type=int, default=4)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--mean", action="store_true", help="return the mean of the last visible update")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-mode", choices=("draw", "mean"), default="draw")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("inspect", help="sample / bias / variance / weight rows per label")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("check", help="run the oracle verification suite")
    p.add_argument("--fast", action="store_true", help="sub-second subset only")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
