"""Checkpoint container round-trips and error handling."""

import numpy as np
import pytest

from picopipe.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from picopipe.rng import Rng


def test_round_trip(tmp_path):
    rng = Rng(1)
    tensors = {
        "a.weights": rng.normal(size=(3, 4)),
        "a.bias": rng.normal(size=5),
        "scalarish": np.array(2.5),
    }
    meta = {"kind": "test", "labels": ["x", "y"], "nested": {"n": 3}}
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(path, tensors, meta)
    loaded, loaded_meta = load_checkpoint(path)
    assert loaded_meta == meta
    assert set(loaded) == set(tensors)
    for k in tensors:
        np.testing.assert_array_equal(loaded[k], tensors[k])


def test_header_is_versioned(tmp_path):
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(path, {"t": np.ones(2)}, {})
    with open(path, "rb") as fh:
        assert fh.read(len(MAGIC)) == MAGIC


def test_bad_magic(tmp_path):
    path = str(tmp_path / "bad.ckpt")
    with open(path, "wb") as fh:
        fh.write(b"not a checkpoint at all\n" + b"\x00" * 64)
    with pytest.raises(ValueError, match="bad magic"):
        load_checkpoint(path)


def test_truncated_payload(tmp_path):
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(path, {"t": np.ones(100)}, {})
    data = open(path, "rb").read()
    with open(path, "wb") as fh:
        fh.write(data[:-40])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(path)
