"""
Binary model checkpoint container.

Layout (all little-endian):
    magic      4 bytes  b"AUGB"
    version    uint16
    header_len uint32
    header     UTF-8 JSON: {"config": {...}, "seed": int, "epoch": int | null,
                            "params": [[name, [shape...]], ...]}
    payload    float32 values of every parameter, in header order, C order

float32 storage rounds the float64 training parameters; loading returns float64 arrays.
"""

import json
import struct
from pathlib import Path

import numpy as np

from errors import DatasetError

MAGIC = b"AUGB"
VERSION = 1
_PREFIX_FMT = "<4sHI"
_PREFIX_SIZE = struct.calcsize(_PREFIX_FMT)


def write_checkpoint(path, params: dict, config: dict, seed: int, epoch: int | None = None) -> Path:
    path = Path(path)
    header = {
        "config": config,
        "seed":   seed,
        "epoch":  epoch,
        "params": [[name, list(np.shape(arr))] for name, arr in params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(struct.pack(_PREFIX_FMT, MAGIC, VERSION, len(header_bytes)))
        f.write(header_bytes)
        for arr in params.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return path


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Returns (header, params)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DatasetError(f"cannot read checkpoint {path}: {e}") from e
    if len(data) < _PREFIX_SIZE:
        raise DatasetError(f"{path}: truncated checkpoint")
    magic, version, header_len = struct.unpack_from(_PREFIX_FMT, data, 0)
    if magic != MAGIC:
        raise DatasetError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise DatasetError(f"{path}: unsupported checkpoint version {version}")
    start = _PREFIX_SIZE + header_len
    try:
        header = json.loads(data[_PREFIX_SIZE:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DatasetError(f"{path}: corrupt checkpoint header: {e}") from e

    params = {}
    offset = start
    for name, shape in header["params"]:
        n = int(np.prod(shape, dtype=np.int64))
        end = offset + 4 * n
        if end > len(data):
            raise DatasetError(f"{path}: payload ends inside parameter {name}")
        params[name] = np.frombuffer(data, dtype="<f4", count=n, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise DatasetError(f"{path}: {len(data) - offset} trailing bytes after payload")
    return header, params
