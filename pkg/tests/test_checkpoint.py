import json
import struct

import numpy as np
import pytest

from nbm import checkpoint, core
from nbm.errors import CorruptCheckpointError, FormatError, VersionError


def model(dtype=np.float32):
    return core.init_model(core.default_spec(3, 4, n_h=2), 7, dtype)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_round_trip_bit_exact(tmp_path, dtype):
    m = model(dtype)
    extras = {"train.step": np.array(12, dtype=np.int64), "opt.m.theta.W0": np.ones((32, 3))}
    checkpoint.save_checkpoint(m, tmp_path / "m.nbm", extras)
    back, ex = checkpoint.load_training_state(tmp_path / "m.nbm")
    assert back.spec == m.spec and back.dtype == m.dtype
    for (na, a), (nb, b) in zip(m.named_params(), back.named_params()):
        assert na == nb and a.tobytes() == b.tobytes()
    assert int(ex["train.step"]) == 12 and ex["opt.m.theta.W0"].shape == (32, 3)


def test_header_layout():
    raw = checkpoint.dumps(model())
    assert raw[:4] == b"NBM1" and struct.unpack("<I", raw[4:8])[0] == 1
    (n,) = struct.unpack("<I", raw[8:12])
    spec = json.loads(raw[12:12 + n])
    assert spec["n_h"] == 2 and spec["visible_kind"] == "gaussian"


def test_flipped_byte_rejected():
    raw = bytearray(checkpoint.dumps(model()))
    raw[-20] ^= 0x01
    with pytest.raises(CorruptCheckpointError):
        checkpoint.loads(bytes(raw))


def test_bad_magic_and_truncation():
    raw = checkpoint.dumps(model())
    with pytest.raises(FormatError):
        checkpoint.loads(b"XXXX" + raw[4:])
    with pytest.raises((FormatError, CorruptCheckpointError)):
        checkpoint.loads(raw[:len(raw) // 2])


def _reseal(body):
    return body + checkpoint._checksum(body)


def test_unknown_version():
    body = bytearray(checkpoint.dumps(model())[:-8])
    body[4:8] = struct.pack("<I", 99)
    with pytest.raises(VersionError):
        checkpoint.loads(_reseal(bytes(body)))


def test_spec_shape_mismatch():
    m = model()
    other = core.init_model(core.default_spec(3, 4, n_h=3), 0)
    # header from m, arrays from a model with a different n_h
    raw = checkpoint.dumps(other)[:-8]
    spec_m = json.dumps(m.spec.to_dict(), sort_keys=True).encode()
    (n,) = struct.unpack("<I", raw[8:12])
    body = raw[:8] + struct.pack("<I", len(spec_m)) + spec_m + raw[12 + n:]
    with pytest.raises(FormatError):
        checkpoint.loads(_reseal(body))
