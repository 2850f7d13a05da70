"""Single-file parameter checkpoints.

Layout: magic ``EDKP``, u16 format version, u32 header length, a JSON
header (model spec, seed, epoch, array directory), then the arrays as
little-endian float32 blobs in declaration order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"EDKP"
VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(path, spec_dict: dict, seed: int, epoch: int, arrays: list) -> None:
    """``arrays`` is an ordered list of (name, ndarray) pairs."""
    entries = [{"name": name, "shape": list(arr.shape)} for name, arr in arrays]
    header = json.dumps({"spec": spec_dict, "seed": seed, "epoch": epoch,
                         "entries": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(header)))
        fh.write(header)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Returns (header dict, ordered {name: float32 array})."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic {blob[:4]!r}")
    version, hlen = struct.unpack("<HI", blob[4:10])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[10:10 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt JSON header: {exc}") from exc
    arrays = {}
    offset = 10 + hlen
    for entry in header["entries"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        raw = blob[offset:offset + nbytes]
        if len(raw) != nbytes:
            raise CheckpointError(f"truncated payload at entry '{entry['name']}'")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        offset += nbytes
    return header, arrays
