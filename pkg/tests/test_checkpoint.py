"""Checkpoint serialization."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from catan_xdim import checkpoint
from catan_xdim.checkpoint import MAGIC, CheckpointError
from catan_xdim.encoding import COLS, N_BOARD_CHANNELS, N_SCALARS, ROWS
from catan_xdim.network import ARCHITECTURES, NetworkConfig, NetworkParams, forward, init_network


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_round_trip_bit_exact(arch, tmp_path):
    cfg = NetworkConfig(arch, layers=2, channels=4, scalars=6, baseline_channels=5,
                        compat117=arch == "XdimRes")
    params = init_network(cfg, np.random.default_rng(1))
    path = tmp_path / "a.xdim"
    checkpoint.save(path, params, {"step": 7})
    loaded, meta = checkpoint.load(path)
    assert loaded.config == cfg and meta == {"step": "7"}
    assert list(loaded.arrays) == list(params.arrays)
    for name, arr in params.arrays.items():
        assert loaded.arrays[name].dtype == np.float32
        assert loaded.arrays[name].tobytes() == arr.tobytes()
    rng = np.random.default_rng(2)
    ch, sc = rng.random((5, N_BOARD_CHANNELS, ROWS, COLS)), rng.random((5, N_SCALARS))
    assert forward(loaded, ch, sc).logits.tobytes() == forward(params, ch, sc).logits.tobytes()
    assert checkpoint.dumps(loaded, {"step": 7}) == path.read_bytes()


def test_header_layout():
    params = init_network(NetworkConfig(layers=2, channels=3, scalars=4), np.random.default_rng(0))
    data = checkpoint.dumps(params)
    assert data[:8] == MAGIC
    assert struct.unpack("<I", data[8:12])[0] == checkpoint.FORMAT_VERSION


def _blob():
    params = init_network(NetworkConfig(layers=2, channels=3, scalars=4), np.random.default_rng(0))
    return params, checkpoint.dumps(params)


def test_bad_magic():
    _, data = _blob()
    with pytest.raises(CheckpointError, match="magic"):
        checkpoint.loads(b"NOTACKPT" + data[8:])


def test_bad_version():
    _, data = _blob()
    with pytest.raises(CheckpointError, match="version"):
        checkpoint.loads(data[:8] + struct.pack("<I", 99) + data[12:])


@pytest.mark.parametrize("cut", [4, 20, 200, -1])
def test_truncated(cut):
    _, data = _blob()
    with pytest.raises(CheckpointError, match="truncated"):
        checkpoint.loads(data[:cut])


def test_trailing_bytes():
    _, data = _blob()
    with pytest.raises(CheckpointError, match="trailing"):
        checkpoint.loads(data + b"\0")


def test_shape_mismatch():
    params, _ = _blob()
    arrays = dict(params.arrays)
    arrays["value_w"] = np.zeros((1, 5), dtype=np.float32)
    bad = checkpoint.dumps(NetworkParams(params.config, arrays))
    with pytest.raises(CheckpointError, match="shapes"):
        checkpoint.loads(bad)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        checkpoint.load(tmp_path / "nope.xdim")
