"""MAT / HDF5 subject files -> EEGD container plus an integrity manifest.

The source must hold a trials x channels x samples numeric array and an
exemplar label vector under one of the documented candidate names.  The
only numeric transformation is the float32 cast; a channel count other
than 124 is an explicit error, never a silent reshape.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .container import ContainerFormatError, read_container, write_container

EXPECTED_CHANNELS = 124
N_EXEMPLARS = 72

DATA_CANDIDATES = ("X_3D", "X", "data", "trials", "eeg")
LABEL_CANDIDATES = ("exemplarLabels", "exemplar_labels", "labels", "y")
SUBJECT_CANDIDATES = ("sub", "subject", "subject_id")
RATE_CANDIDATES = ("Fs", "fs", "sampling_rate_hz")
DEFAULT_RATE_HZ = 62.5


class SourceLayoutError(Exception):
    pass


def _load_source_fields(path: Path) -> dict:
    """Read a MAT (v5 or v7.3/HDF5) or plain HDF5 file into {name: array}."""
    try:
        from scipy import io as spio
        raw = spio.loadmat(path)
        return {k: np.asarray(v) for k, v in raw.items() if not k.startswith("__")}
    except (NotImplementedError, ValueError):
        pass  # v7.3 MAT files and plain HDF5 land here
    import h5py
    fields = {}
    with h5py.File(path, "r") as fh:
        def collect(name, obj):
            if isinstance(obj, h5py.Dataset):
                fields[name.split("/")[-1]] = obj[()]
        fh.visititems(collect)
    return fields


def _pick(fields: dict, candidates) -> tuple | None:
    for name in candidates:
        if name in fields:
            return name, fields[name]
    return None


def _orient_trials(arr: np.ndarray, n_labels: int) -> np.ndarray:
    """Accept [N, 124, S] as-is or [124, S, N] (channel-first) transposed."""
    if arr.ndim != 3:
        raise SourceLayoutError(f"expected a 3-D trial array, got shape {arr.shape}")
    if arr.shape[0] == n_labels and arr.shape[1] == EXPECTED_CHANNELS:
        return arr
    if arr.shape[0] == EXPECTED_CHANNELS and arr.shape[2] == n_labels:
        return arr.transpose(2, 0, 1)
    if EXPECTED_CHANNELS not in arr.shape:
        raise SourceLayoutError(
            f"no {EXPECTED_CHANNELS}-channel axis in source array of shape {arr.shape}; "
            "refusing to reshape")
    raise SourceLayoutError(
        f"cannot match array of shape {arr.shape} to {n_labels} labels")


def _normalize_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1).astype(np.int64)
    if labels.size == 0:
        raise SourceLayoutError("empty label vector")
    lo, hi = labels.min(), labels.max()
    if lo == 1 and hi == N_EXEMPLARS:
        labels = labels - 1
    elif not (lo >= 0 and hi < N_EXEMPLARS):
        raise SourceLayoutError(
            f"exemplar labels span [{lo}, {hi}]; expected 0..71 or 1..72")
    return labels


def _scalar(value, default):
    try:
        arr = np.asarray(value).reshape(-1)
        return arr[0].item() if arr.size else default
    except Exception:
        return default


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def convert(source, out) -> dict:
    """Write the container and return the conversion manifest dict."""
    source, out = Path(source), Path(out)
    fields = _load_source_fields(source)

    picked_data = _pick(fields, DATA_CANDIDATES)
    if picked_data is None:
        raise SourceLayoutError(
            f"no trial array under any of {DATA_CANDIDATES}; found {sorted(fields)}")
    picked_labels = _pick(fields, LABEL_CANDIDATES)
    if picked_labels is None:
        raise SourceLayoutError(
            f"no exemplar labels under any of {LABEL_CANDIDATES}; found {sorted(fields)}")

    labels = _normalize_labels(picked_labels[1])
    trials = _orient_trials(np.asarray(picked_data[1]), len(labels)).astype(np.float32)
    if trials.shape[0] != len(labels):
        raise SourceLayoutError(
            f"{trials.shape[0]} trials vs {len(labels)} labels")
    if not np.isfinite(trials).all():
        raise SourceLayoutError("source contains non-finite samples")

    picked_subject = _pick(fields, SUBJECT_CANDIDATES)
    subject = str(_scalar(picked_subject[1], source.stem)) if picked_subject else source.stem
    picked_rate = _pick(fields, RATE_CANDIDATES)
    rate = float(_scalar(picked_rate[1], DEFAULT_RATE_HZ)) if picked_rate else DEFAULT_RATE_HZ

    channel_names = [f"E{i + 1}" for i in range(trials.shape[1])]
    write_container(out, trials, labels, channel_names, rate, subject)

    histogram = np.bincount(labels, minlength=N_EXEMPLARS)
    manifest = {
        "source_file": source.name,
        "source_sha256": _sha256(source),
        "source_fields": {"data": picked_data[0], "labels": picked_labels[0]},
        "subject_id": subject,
        "n_trials": int(trials.shape[0]),
        "n_channels": int(trials.shape[1]),
        "n_samples": int(trials.shape[2]),
        "sampling_rate_hz": rate,
        "category_rule": "category = exemplar_index // 12",
        "label_histogram": histogram.tolist(),
        "per_channel_mean": trials.mean(axis=(0, 2), dtype=np.float64).tolist(),
        "per_channel_std": trials.std(axis=(0, 2), dtype=np.float64).tolist(),
        "output_file": out.name,
        "output_bytes": out.stat().st_size,
        "output_sha256": _sha256(out),
    }
    return manifest


def verify(container_path, manifest_path) -> list:
    """Recompute sizes, checksums, and statistics; returns failing fields."""
    container_path, manifest_path = Path(container_path), Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    failures = []

    size = container_path.stat().st_size
    if size != manifest["output_bytes"]:
        failures.append(f"size: {size} != {manifest['output_bytes']}")
        return failures  # size fail precedes checksum work

    if _sha256(container_path) != manifest["output_sha256"]:
        failures.append("output_sha256 mismatch")

    try:
        header, labels, trials = read_container(container_path)
    except ContainerFormatError as exc:
        failures.append(f"container unreadable: {exc}")
        return failures

    for key, actual in (("n_trials", header["n_trials"]),
                        ("n_channels", header["n_channels"]),
                        ("n_samples", header["n_samples"]),
                        ("subject_id", header["subject_id"])):
        if actual != manifest[key]:
            failures.append(f"{key}: {actual} != {manifest[key]}")

    histogram = np.bincount(labels, minlength=N_EXEMPLARS).tolist()
    if histogram != manifest["label_histogram"]:
        failures.append("label_histogram mismatch")

    mean = trials.mean(axis=(0, 2), dtype=np.float64)
    std = trials.std(axis=(0, 2), dtype=np.float64)
    if not np.allclose(mean, manifest["per_channel_mean"], atol=1e-6):
        failures.append("per_channel_mean mismatch")
    if not np.allclose(std, manifest["per_channel_std"], atol=1e-6):
        failures.append("per_channel_std mismatch")
    return failures
