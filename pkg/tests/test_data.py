import gzip
import struct

import numpy as np
import pytest

from nbm import data
from nbm.errors import DataError, FormatError, LengthError

from conftest import MNIST_IMAGES, MNIST_LABELS


def test_idx_image_header(tmp_path):
    payload = bytes(range(256)) * 6 + bytes(32)
    path = tmp_path / "img.idx"
    path.write_bytes(bytes([0, 0, 8, 3]) + struct.pack(">3I", 2, 28, 28) + payload)
    arr = data.load_idx(path)
    assert arr.shape == (2, 28, 28) and arr.dtype == np.uint8
    assert arr.tobytes() == payload


def test_idx_labels(tmp_path):
    path = tmp_path / "lab.idx"
    path.write_bytes(bytes([0, 0, 8, 1]) + struct.pack(">I", 2) + bytes([3, 7]))
    np.testing.assert_array_equal(data.load_idx(path), [3, 7])


def test_idx_errors(tmp_path):
    short = tmp_path / "short.idx"
    short.write_bytes(bytes([0, 0, 8, 3]) + struct.pack(">3I", 2, 28, 28) + bytes(100))
    with pytest.raises(LengthError):
        data.load_idx(short)
    bad = tmp_path / "bad.idx"
    bad.write_bytes(bytes([0, 0, 8, 2]) + struct.pack(">I", 1) + bytes(1))
    with pytest.raises(FormatError):
        data.load_idx(bad)
    trunc = tmp_path / "trunc.gz"
    trunc.write_bytes(gzip.compress(bytes([0, 0, 8, 1, 0, 0, 0, 1, 5]))[:-6])
    with pytest.raises(LengthError):
        data.load_idx(trunc)


def test_idx_round_trip(tmp_path):
    arr = np.random.default_rng(0).integers(0, 256, size=(3, 4, 5), dtype=np.uint8)
    data.write_idx(tmp_path / "a.idx", arr)
    np.testing.assert_array_equal(data.load_idx(tmp_path / "a.idx"), arr)


def test_mnist10k_fixture():
    images, labels = data.load_idx(MNIST_IMAGES), data.load_idx(MNIST_LABELS)
    assert images.shape == (10000, 28, 28) and labels.shape == (10000,)
    assert labels.min() == 0 and labels.max() == 9
    assert len(np.unique(labels)) == 10


def test_preprocess_gaussian_endpoints_and_determinism():
    img = np.array([[[0, 255]]], dtype=np.uint8)
    np.testing.assert_array_equal(data.preprocess_gaussian(img, 0, noise_var=0), [[-0.5, 0.5]])
    a = data.preprocess_gaussian(img, 3)
    assert np.all(np.abs(a - [[-0.5, 0.5]]) < 6 * np.sqrt(0.001))
    assert a.tobytes() == data.preprocess_gaussian(img, 3).tobytes()


def test_preprocess_gaussian_noise_variance():
    imgs = np.zeros((1276, 28, 28), dtype=np.uint8)  # ~10^6 pixels
    y = data.preprocess_gaussian(imgs, 1) + 0.5
    assert y.size >= 10**6
    assert abs(y.var() / 0.001 - 1) < 0.05
    assert np.mean(np.abs(y) <= 6 * np.sqrt(0.001)) >= 0.999999


def test_preprocess_ising():
    img = np.array([[[0, 255, 128, 127]]], dtype=np.uint8)
    np.testing.assert_array_equal(data.preprocess_ising(img), [[-1, 1, 1, -1]])
    np.testing.assert_array_equal(data.preprocess_ising(np.zeros((1, 2, 2), np.uint8)), [[-1] * 4])


def test_one_hot():
    np.testing.assert_array_equal(data.one_hot([3]), [[0, 0, 0, 1, 0, 0, 0, 0, 0, 0]])
    x = data.one_hot([0, 9])
    np.testing.assert_array_equal(x, np.eye(10)[[0, 9]])
    assert np.all(data.one_hot(np.arange(10)).sum(axis=1) == 1)
    with pytest.raises(DataError):
        data.one_hot([10])


def test_load_image_dataset_modes():
    ds = data.load_image_dataset(MNIST_IMAGES, MNIST_LABELS, limit=50)
    assert ds.x.shape == (50, 10) and ds.y.shape == (50, 784) and ds.kind == "gaussian"
    assert np.all(ds.x.sum(axis=1) == 1)
    ising = data.load_image_dataset(MNIST_IMAGES, MNIST_LABELS, kind="ising", limit=50)
    assert set(np.unique(ising.y)) == {-1.0, 1.0}
    per = data.load_image_dataset(MNIST_IMAGES, MNIST_LABELS, limit=50, noise_mode="per_epoch")
    e0, e1 = per.epoch_y(0), per.epoch_y(1)
    assert not np.array_equal(e0, e1) and np.array_equal(e0, per.epoch_y(0))


def test_dataset_validation():
    with pytest.raises(DataError):
        data.Dataset(np.ones((2, 1)), np.array([[0.5], [1.0]]), "ising")
    with pytest.raises(DataError):
        data.Dataset(np.ones((2, 1)), np.ones((3, 1)), "gaussian")


def test_synth_classes():
    spec = data.SynthSpec([[1.0, -1.0]], [[0.01, 0.01]], samples_per_class=10_000)
    ds = data.synth_gaussian_classes(spec, 0)
    assert np.all(np.abs(ds.y.mean(axis=0) - [1, -1]) < 0.004)
    assert ds.y.tobytes() == data.synth_gaussian_classes(spec, 0).y.tobytes()
    twin = data.synth_gaussian_classes(data.SynthSpec([[1.0, -1.0]] * 2, [[0.01, 0.01]] * 2,
                                                      samples_per_class=10_000), 0)
    assert np.all(np.abs(twin.y.mean(axis=0) - [1, -1]) < 0.004)
    assert np.all(np.abs(twin.y.var(axis=0) / ds.y.var(axis=0) - 1) < 0.05)
    with pytest.raises(DataError):
        data.synth_gaussian_classes(data.SynthSpec([[0.0]], [[-1.0]]), 0)


def test_synth_bimodal():
    ds = data.synth_bimodal(data.SynthSpec(center=2.0, n_y=2), 0)
    assert np.all(ds.x == 1) and ds.y.shape == (10_000, 2)
    assert np.all(np.abs(ds.y.mean(axis=0)) < 4 * 2 / np.sqrt(10_000))
    assert abs(np.mean(ds.y[:, 0] > 0) - 0.5) < 0.02
    assert ds.y.tobytes() == data.synth_bimodal(data.SynthSpec(center=2.0, n_y=2), 0).y.tobytes()
    flat = data.synth_bimodal(data.SynthSpec(center=0.0, n_y=2), 1)
    assert abs(flat.y.var() / 0.05 - 1) < 0.05
