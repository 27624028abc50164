"""Run configuration: flat dotted keys, file values over built-in defaults.

A config file is TOML restricted to dotted keys, e.g.::

    model.n_h = 64
    train.epochs = 50
    data.source = "mnist"
    data.images = "train-images-idx3-ubyte.gz"

Precedence is command-line ``--set`` > config file > defaults below.
"""
import json
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import core, data
from .errors import ConfigError
from .trainer import TrainConfig

MODEL_DEFAULTS = {
    "n_h": 64,
    "hidden": 32,
    "visible_kind": "gaussian",
    "tanh_bias": None,
    "weight_scaling": True,
    "init_seed": 0,
}

DATA_DEFAULTS = {
    "source": "mnist",
    "images": "",
    "labels": "",
    "limit": 0,
    "noise_seed": 0,
    "noise_mode": "static",
    "threshold": 0.5,
    "n_classes": 10,
    "seed": 0,
    "class_means": None,
    "class_variances": None,
    "samples_per_class": 2000,
    "center": 2.0,
    "n_y": 2,
    "mode_var": 0.05,
    "n_samples": 10000,
}

SOURCES = ("mnist", "synth_classes", "synth_bimodal")
_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}


@dataclass
class RunConfig:
    model: dict
    train: TrainConfig
    data: dict
    output_dir: str

    def flat(self):
        out = {f"model.{k}": v for k, v in self.model.items()}
        out.update({f"train.{f.name}": getattr(self.train, f.name) for f in fields(TrainConfig)})
        out.update({f"data.{k}": v for k, v in self.data.items()})
        out["output_dir"] = self.output_dir
        return out

    def dumps(self):
        lines = []
        for key, value in self.flat().items():
            if value is None:
                continue
            lines.append(f"{key} = {json.dumps(value)}")
        return "\n".join(lines) + "\n"

    def validate_paths(self):
        if self.data["source"] == "mnist":
            for key in ("images", "labels"):
                path = self.data[key]
                if not path or not Path(path).is_file():
                    raise ConfigError(f"data.{key} does not exist: {path!r}")


def _flatten(tree, prefix=""):
    out = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def parse_override(text):
    """``key=value`` with the value parsed as TOML when possible."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = (s.strip() for s in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def load_file(path):
    try:
        with open(path, "rb") as fh:
            return _flatten(tomllib.load(fh))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc


def resolve(values, overrides=()):
    """Merge flat key/value pairs over the defaults into a :class:`RunConfig`."""
    merged = dict(values)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        merged[key] = value
    model = dict(MODEL_DEFAULTS)
    data_cfg = dict(DATA_DEFAULTS)
    train = {}
    output_dir = merged.pop("output_dir", "run")
    for key, value in merged.items():
        section, _, name = key.partition(".")
        if section == "model" and name in model:
            model[name] = value
        elif section == "data" and name in data_cfg:
            data_cfg[name] = value
        elif section == "train" and name in _TRAIN_FIELDS:
            train[name] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if model["visible_kind"] not in core.VISIBLE_KINDS:
        raise ConfigError(f"model.visible_kind must be one of {core.VISIBLE_KINDS}")
    if data_cfg["source"] not in SOURCES:
        raise ConfigError(f"data.source must be one of {SOURCES}")
    if data_cfg["noise_mode"] not in ("static", "per_epoch"):
        raise ConfigError("data.noise_mode must be 'static' or 'per_epoch'")
    if "learning_rate" not in train:
        train["learning_rate"] = 0.01 if model["visible_kind"] == "ising" else 0.0005
    try:
        train_cfg = TrainConfig(**train)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(model, train_cfg, data_cfg, str(output_dir))


def load(path=None, overrides=()):
    return resolve(load_file(path) if path else {}, overrides)


def build_dataset(cfg):
    d = cfg.data
    kind = cfg.model["visible_kind"]
    if d["source"] == "mnist":
        cfg.validate_paths()
        return data.load_image_dataset(d["images"], d["labels"], kind=kind, limit=d["limit"],
                                       noise_seed=d["noise_seed"], threshold=d["threshold"],
                                       noise_mode=d["noise_mode"], n_classes=d["n_classes"])
    if kind != "gaussian":
        raise ConfigError("synthetic datasets have gaussian visibles")
    spec = data.SynthSpec(class_means=d["class_means"], class_variances=d["class_variances"],
                          samples_per_class=d["samples_per_class"], center=d["center"],
                          n_y=d["n_y"], mode_var=d["mode_var"], n_samples=d["n_samples"])
    if d["source"] == "synth_classes":
        if d["class_means"] is None or d["class_variances"] is None:
            raise ConfigError("synth_classes needs data.class_means and data.class_variances")
        return data.synth_gaussian_classes(spec, d["seed"])
    return data.synth_bimodal(spec, d["seed"])


def build_spec(cfg, dataset):
    m = cfg.model
    try:
        return core.default_spec(dataset.x.shape[1], dataset.y.shape[1], n_h=m["n_h"],
                                 visible_kind=m["visible_kind"], hidden=m["hidden"],
                                 tanh_bias=m["tanh_bias"], weight_scaling=m["weight_scaling"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
