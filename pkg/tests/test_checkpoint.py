import numpy as np
import pytest

from fusionnav.checkpoint import (
    CheckpointFormatError,
    load_checkpoint,
    save_checkpoint,
)


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "a.w": rng.standard_normal((3, 4)).astype(np.float32),
        "a.b": rng.standard_normal(4).astype(np.float32),
        "check64": rng.standard_normal((2, 2, 2)),  # float64 path
        "scalar": np.array(0.5, dtype=np.float32),
    }
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, tensors, config={"kind": "demo", "depth": "3"})
    loaded, config = load_checkpoint(path)
    assert config == {"kind": "demo", "depth": "3"}
    assert set(loaded) == set(tensors)
    for name in tensors:
        assert loaded[name].dtype == tensors[name].dtype
        assert np.array_equal(
            loaded[name].reshape(-1), np.asarray(tensors[name]).reshape(-1)
        )
    # saving again produces identical bytes
    path2 = tmp_path / "m2.ckpt"
    save_checkpoint(path2, tensors, config={"kind": "demo", "depth": "3"})
    assert path.read_bytes() == path2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"NOT-A-CHECKPOINT 1\nend\n")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_version_mismatch_rejected(tmp_path):
    path = tmp_path / "x.ckpt"
    save_checkpoint(path, {"t": np.zeros(2, np.float32)})
    data = path.read_bytes().replace(b"FUSIONNAV-CKPT 1", b"FUSIONNAV-CKPT 9")
    path.write_bytes(data)
    with pytest.raises(CheckpointFormatError) as err:
        load_checkpoint(path)
    assert "9" in str(err.value)


def test_truncated_body_rejected(tmp_path):
    path = tmp_path / "x.ckpt"
    save_checkpoint(path, {"t": np.arange(8, dtype=np.float32)})
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_unsupported_dtype_rejected(tmp_path):
    with pytest.raises(CheckpointFormatError):
        save_checkpoint(tmp_path / "x.ckpt", {"t": np.zeros(2, dtype=np.int32)})
