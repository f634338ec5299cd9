"""Parameter checkpoint file: plain-text manifest header followed by raw
little-endian tensor buffers.

Layout::

    FUSIONNAV-CKPT 1
    config <n>            (optional; followed by n key=value lines)
    key=value
    tensor <name> <dtype> <d0,d1,...> <offset> <nbytes>
    ...
    end
    <binary buffers, offsets relative to the byte after the header>

Round-trips are bit-exact: buffers are written exactly as stored in memory
(little-endian float32 by default, float64 supported for checking paths).
"""

import io
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_MAGIC = "FUSIONNAV-CKPT"
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_DTYPE_NAMES = {np.dtype("<f4"): "f32", np.dtype("<f8"): "f64"}


class CheckpointFormatError(ValueError):
    """Raised when a checkpoint file cannot be parsed or validated."""


def save_checkpoint(path, tensors, config=None):
    """Write named tensors (dict name -> ndarray) plus an optional config
    block of string key=value pairs."""
    path = Path(path)
    header = io.StringIO()
    header.write(f"{_MAGIC} {FORMAT_VERSION}\n")
    if config:
        header.write(f"config {len(config)}\n")
        for key, value in config.items():
            if "\n" in str(value) or "=" in str(key):
                raise CheckpointFormatError(f"config entry {key!r} is not header-safe")
            header.write(f"{key}={value}\n")
    buffers = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        if le.dtype not in _DTYPE_NAMES:
            raise CheckpointFormatError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
        raw = le.tobytes()
        dims = ",".join(str(d) for d in arr.shape) if arr.shape else "1"
        header.write(
            f"tensor {name} {_DTYPE_NAMES[le.dtype]} {dims} {offset} {len(raw)}\n"
        )
        buffers.append(raw)
        offset += len(raw)
    header.write("end\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("utf-8"))
        for raw in buffers:
            fh.write(raw)


def load_checkpoint(path):
    """Read a checkpoint; returns (tensors, config) dicts."""
    path = Path(path)
    data = path.read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise CheckpointFormatError(f"{path}: not a checkpoint file")
    first = data[:newline].decode("utf-8", errors="replace").split()
    if len(first) != 2 or first[0] != _MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic line {first!r}")
    version = int(first[1])
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
        )
    pos = newline + 1
    config = {}
    entries = []
    while True:
        newline = data.find(b"\n", pos)
        if newline < 0:
            raise CheckpointFormatError(f"{path}: header not terminated by 'end'")
        line = data[pos:newline].decode("utf-8")
        pos = newline + 1
        if line == "end":
            break
        if line.startswith("config "):
            n = int(line.split()[1])
            for _ in range(n):
                newline = data.find(b"\n", pos)
                if newline < 0:
                    raise CheckpointFormatError(f"{path}: truncated config block")
                key, _, value = data[pos:newline].decode("utf-8").partition("=")
                config[key] = value
                pos = newline + 1
        elif line.startswith("tensor "):
            parts = line.split()
            if len(parts) != 6:
                raise CheckpointFormatError(f"{path}: malformed tensor line {line!r}")
            _, name, dtype_name, dims, offset, nbytes = parts
            if dtype_name not in _DTYPES:
                raise CheckpointFormatError(f"{path}: unknown dtype {dtype_name!r}")
            shape = tuple(int(d) for d in dims.split(","))
            entries.append((name, _DTYPES[dtype_name], shape, int(offset), int(nbytes)))
        else:
            raise CheckpointFormatError(f"{path}: unexpected header line {line!r}")
    body = data[pos:]
    tensors = {}
    for name, dtype, shape, offset, nbytes in entries:
        expected = int(np.prod(shape)) * dtype.itemsize
        if nbytes != expected:
            raise CheckpointFormatError(
                f"{path}: tensor {name!r} declares {nbytes} bytes but shape "
                f"{shape} needs {expected}"
            )
        if offset + nbytes > len(body):
            raise CheckpointFormatError(f"{path}: tensor {name!r} data truncated")
        tensors[name] = np.frombuffer(
            body, dtype=dtype, count=int(np.prod(shape)), offset=offset
        ).reshape(shape).copy()
    return tensors, config
