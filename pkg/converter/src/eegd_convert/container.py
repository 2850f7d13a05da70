"""Standalone writer/reader for the EEGD trial container.

Implements the documented wire format directly (magic "EEGD", u16
version, u32 header length, JSON header, u16 exemplar labels, float32
little-endian [trial][channel][sample] data) so the converter stays
decoupled from the decoding package.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"EEGD"
VERSION = 1
N_EXEMPLARS = 72


class ContainerFormatError(Exception):
    pass


def write_container(path, trials: np.ndarray, exemplar_labels: np.ndarray,
                    channel_names, sampling_rate_hz: float, subject_id: str) -> None:
    trials = np.ascontiguousarray(trials, dtype="<f4")
    labels = np.ascontiguousarray(exemplar_labels, dtype="<u2")
    if trials.ndim != 3:
        raise ContainerFormatError(f"trials must be 3-D, got {trials.shape}")
    if labels.shape != (trials.shape[0],):
        raise ContainerFormatError("one label per trial required")
    if labels.size and labels.max() >= N_EXEMPLARS:
        raise ContainerFormatError(f"exemplar label {labels.max()} outside [0, {N_EXEMPLARS})")
    header = json.dumps({
        "subject_id": subject_id,
        "n_trials": int(trials.shape[0]),
        "n_channels": int(trials.shape[1]),
        "n_samples": int(trials.shape[2]),
        "sampling_rate_hz": float(sampling_rate_hz),
        "channel_names": list(channel_names),
        "label_encoding": "u16 exemplar ids 0..71; category = exemplar // 12",
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(header)))
        fh.write(header)
        fh.write(labels.tobytes())
        fh.write(trials.tobytes())


def read_container(path):
    """Returns (header dict, labels, trials); validates sizes strictly."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ContainerFormatError(f"bad magic {blob[:4]!r}")
    version, hlen = struct.unpack("<HI", blob[4:10])
    if version != VERSION:
        raise ContainerFormatError(f"unsupported version {version}")
    try:
        header = json.loads(blob[10:10 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerFormatError(f"corrupt JSON header: {exc}") from exc
    n, c, s = header["n_trials"], header["n_channels"], header["n_samples"]
    expected = 10 + hlen + n * 2 + n * c * s * 4
    if len(blob) != expected:
        raise ContainerFormatError(f"file is {len(blob)} bytes, expected {expected}")
    labels = np.frombuffer(blob[10 + hlen:10 + hlen + n * 2], dtype="<u2")
    trials = np.frombuffer(blob[10 + hlen + n * 2:], dtype="<f4").reshape(n, c, s)
    return header, labels, trials
