import csv
from pathlib import Path

import numpy as np
import pytest

from nbm import checkpoint, cli, config, core
from nbm.errors import ConfigError

from conftest import MNIST_IMAGES, MNIST_LABELS, read_pgm

ROOT = Path(__file__).resolve().parents[1]
SYNTH_CFG = ROOT / "configs" / "synth_classes.toml"


def write_cfg(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_precedence(tmp_path):
    path = write_cfg(tmp_path, 'model.n_h = 8\ntrain.epochs = 3\n[data]\nsource = "synth_bimodal"\n')
    cfg = config.load(path, ["train.epochs=5", "train.seed = 9"])
    assert cfg.model["n_h"] == 8 and cfg.train.epochs == 5 and cfg.train.seed == 9
    assert cfg.train.k_steps == 32 and cfg.data["source"] == "synth_bimodal"
    assert config.load(path).train.epochs == 3


def test_kind_dependent_learning_rate():
    assert config.resolve({"model.visible_kind": "ising"}).train.learning_rate == 0.01
    assert config.resolve({}).train.learning_rate == 0.0005
    assert config.resolve({"model.visible_kind": "ising", "train.learning_rate": 0.1}).train.learning_rate == 0.1


@pytest.mark.parametrize("values", [{"model.nope": 1}, {"train.k_steps": 0}, {"data.source": "cifar"},
                                    {"model.visible_kind": "potts"}, {"data.noise_mode": "sometimes"}])
def test_config_errors(values):
    with pytest.raises(ConfigError):
        config.resolve(values)


def test_snapshot_reproduces_config(tmp_path):
    cfg = config.load(SYNTH_CFG, ["train.seed=4"])
    snap = write_cfg(tmp_path, cfg.dumps())
    assert config.load(snap).flat() == cfg.flat()


def test_parse_labels():
    assert cli.parse_labels("0..3", 10) == [0, 1, 2, 3]
    assert cli.parse_labels("1,5", 10) == [1, 5]
    assert cli.parse_labels(None, 3) == [0, 1, 2]
    with pytest.raises(ConfigError):
        cli.parse_labels("0..10", 10)


def test_train_synth_end_to_end(tmp_path):
    out = tmp_path / "run"
    code = cli.main(["train", "--config", str(SYNTH_CFG), "--set", "train.max_steps=40",
                     "--output-dir", str(out)])
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"model.nbm", "metrics.csv", "config.resolved.toml"}
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert rows[-1]["step"] == "40"
    model, extras = checkpoint.load_training_state(out / "model.nbm")
    assert int(extras["train.step"]) == 40 and int(extras["opt.t"]) == 40

    code = cli.main(["train", "--config", str(SYNTH_CFG), "--set", "train.max_steps=60",
                     "--output-dir", str(out), "--resume", str(out / "model.nbm")])
    assert code == 0
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert [int(r["step"]) for r in rows] == list(range(1, 61))


def test_resume_equals_uninterrupted(tmp_path):
    common = ["--config", str(SYNTH_CFG), "--set", "train.dtype=\"float64\"", "--set", "data.samples_per_class=50"]
    cli.main(["train", *common, "--set", "train.max_steps=12", "--output-dir", str(tmp_path / "a")])
    cli.main(["train", *common, "--set", "train.max_steps=5", "--output-dir", str(tmp_path / "b")])
    cli.main(["train", *common, "--set", "train.max_steps=12", "--output-dir", str(tmp_path / "b"),
              "--resume", str(tmp_path / "b" / "model.nbm")])
    a = (tmp_path / "a" / "model.nbm").read_bytes()
    b = (tmp_path / "b" / "model.nbm").read_bytes()
    assert a == b
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_missing_data_path_exit_2(tmp_path):
    out = tmp_path / "never"
    path = write_cfg(tmp_path, f'output_dir = "{out}"\ndata.images = "{tmp_path}/none.gz"\n'
                               f'data.labels = "{MNIST_LABELS}"\n')
    assert cli.main(["train", "--config", str(path)]) == 2
    assert not out.exists()


def test_bad_config_exit_2(tmp_path):
    assert cli.main(["train", "--config", str(tmp_path / "nope.toml")]) == 2
    path = write_cfg(tmp_path, "model.n_h = \n")
    assert cli.main(["train", "--config", str(path)]) == 2


def test_numeric_error_exit_3(tmp_path):
    out = tmp_path / "boom"
    code = cli.main(["train", "--config", str(SYNTH_CFG), "--output-dir", str(out),
                     "--set", "train.learning_rate=1e30", "--set", "train.max_steps=50"])
    assert code == 3
    model, extras = checkpoint.load_training_state(out / "model.nbm")
    assert int(extras["train.step"]) < 50


@pytest.fixture(scope="module")
def zero_w_ckpt(tmp_path_factory):
    model = core.with_zero_weights(core.init_model(core.default_spec(3, 4, n_h=2), 0))
    path = tmp_path_factory.mktemp("ck") / "zero.nbm"
    checkpoint.save_checkpoint(model, path)
    return path, model


def test_sample_layout_and_determinism(tmp_path, zero_w_ckpt):
    path, model = zero_w_ckpt
    args = ["sample", "--ckpt", str(path), "--labels", "0..2", "--per-label", "4", "--seed", "3"]
    assert cli.main([*args, "--out", str(tmp_path / "a.pgm")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "b.pgm")]) == 0
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
    img = read_pgm(tmp_path / "a.pgm")
    assert img.shape == (4 * 2 + 3 * 2, 3 * 2 + 2 * 2)


def test_sample_mean_with_zero_weights_is_bias(zero_w_ckpt):
    _, model = zero_w_ckpt
    img = cli.sample_grid(model, [0, 1, 2], per_label=2, k=4, mean=True)
    mu, _ = core.condition(model, np.eye(3))
    from nbm import pgm
    for c in range(3):
        tile = img[0:2, c * 4:c * 4 + 2]
        np.testing.assert_array_equal(tile, pgm.to_intensity(mu.mu[c], -0.5, 0.5).reshape(2, 2))


def test_inspect_rows(tmp_path, zero_w_ckpt):
    path, model = zero_w_ckpt
    assert cli.main(["inspect", "--ckpt", str(path), "--out", str(tmp_path / "i.pgm")]) == 0
    img = read_pgm(tmp_path / "i.pgm")
    assert img.shape == (4 * 2 + 3 * 2, 3 * 2 + 2 * 2)
    rows = [img[r * 4:r * 4 + 2] for r in range(4)]
    np.testing.assert_array_equal(rows[0], rows[1])
    assert np.all(rows[3][:, [0, 1, 4, 5, 8, 9]] == 128)  # W = 0 is constant


def test_inspect_constant_precision_gray(tmp_path):
    model = core.init_model(core.default_spec(3, 4, n_h=2), 0)
    for p in model.logp_net.params():
        p[...] = 0
    grid = cli.inspect_grid(model, [0, 1, 2])
    assert np.all(grid[8:10][:, [0, 1, 4, 5, 8, 9]] == 128)


def test_checkpoint_errors_exit_4(tmp_path, zero_w_ckpt):
    path, _ = zero_w_ckpt
    raw = bytearray(path.read_bytes())
    raw[40] ^= 0xFF
    bad = tmp_path / "bad.nbm"
    bad.write_bytes(bytes(raw))
    assert cli.main(["sample", "--ckpt", str(bad), "--out", str(tmp_path / "x.pgm")]) == 4
    assert cli.main(["inspect", "--ckpt", str(tmp_path / "missing.nbm"), "--out", str(tmp_path / "x.pgm")]) == 4
    assert not (tmp_path / "x.pgm").exists()


def test_sample_bad_labels_exit_2(tmp_path, zero_w_ckpt):
    path, _ = zero_w_ckpt
    assert cli.main(["sample", "--ckpt", str(path), "--labels", "5", "--out", str(tmp_path / "x.pgm")]) == 2


def test_check_fast_passes(capsys):
    assert cli.main(["check", "--fast"]) == 0
    out = capsys.readouterr().out
    assert "marginalization" in out and "FAIL" not in out


def test_check_detects_log_cosh_mutation(monkeypatch):
    real = core.log_cosh
    monkeypatch.setattr(core, "log_cosh", lambda a: -real(a))
    assert cli.main(["check", "--fast"]) == 1


def test_ising_mnist_cli(tmp_path):
    path = write_cfg(tmp_path, f'model.visible_kind = "ising"\nmodel.n_h = 8\ntrain.max_steps = 3\n'
                               f'train.k_steps = 2\ndata.images = "{MNIST_IMAGES}"\n'
                               f'data.labels = "{MNIST_LABELS}"\ndata.limit = 256\n'
                               f'output_dir = "{tmp_path / "ising"}"\n')
    assert cli.main(["train", "--config", str(path)]) == 0
    ck = tmp_path / "ising" / "model.nbm"
    assert cli.main(["sample", "--ckpt", str(ck), "--out", str(tmp_path / "s.pgm")]) == 0
    img = read_pgm(tmp_path / "s.pgm")
    assert img.shape == (4 * 28 + 3 * 2, 10 * 28 + 9 * 2)
    assert set(np.unique(img)) <= {0, 255}
