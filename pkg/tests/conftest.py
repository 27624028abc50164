from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"
MNIST_IMAGES = DATA / "mnist10k-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist10k-labels-idx1-ubyte.gz"

SYNTH_MEANS = [[0.5, -0.5, 0.2, 0.0], [-0.3, 0.4, 0.0, 0.6], [0.0, 0.1, -0.6, -0.2]]
SYNTH_VARS = [[0.05, 0.1, 0.2, 0.1], [0.1, 0.05, 0.1, 0.2], [0.2, 0.1, 0.05, 0.1]]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def read_pgm(path):
    """Independent P5 reader via Pillow."""
    from PIL import Image
    with Image.open(path) as im:
        assert im.format == "PPM" and im.mode == "L"
        return np.asarray(im)


@pytest.fixture(scope="session")
def synth_run():
    """The 3-class recovery run shared by the trainer and acceptance suites."""
    from experiments import run_synth_classes
    return run_synth_classes()
