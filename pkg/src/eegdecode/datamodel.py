"""Trial container, on-disk format, channel masks, and the synthetic generator.

The container file layout ("EEGD") is: magic, u16 version, u32 header
length, JSON header, exemplar labels as u16, then float32 little-endian
trial data in [trial][channel][sample] order.  Labels are exemplar ids
0..71; the category label is always derived as exemplar // 12.
"""

from __future__ import annotations

import importlib.resources
import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"EEGD"
VERSION = 1

N_CATEGORIES = 6
EXEMPLARS_PER_CATEGORY = 12
N_EXEMPLARS = N_CATEGORIES * EXEMPLARS_PER_CATEGORY
MODEL_CHANNELS = 124
MODEL_SAMPLES = 32


class ContainerError(Exception):
    """Base for all container-format failures."""


class MagicError(ContainerError):
    pass


class VersionError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass


class LabelRangeError(ContainerError):
    pass


class DatasetInvariantError(ValueError):
    pass


@dataclass
class EegDataset:
    """Trials x channels x samples with exemplar labels.

    category label = exemplar // 12 (12 photographs per semantic category).
    """
    trials: np.ndarray
    exemplar_labels: np.ndarray
    channel_names: list
    sampling_rate_hz: float
    subject_id: str

    def __post_init__(self):
        self.trials = np.asarray(self.trials, dtype=np.float32)
        self.exemplar_labels = np.asarray(self.exemplar_labels, dtype=np.int64)

    @property
    def n_trials(self) -> int:
        return self.trials.shape[0]

    @property
    def n_channels(self) -> int:
        return self.trials.shape[1]

    @property
    def n_samples(self) -> int:
        return self.trials.shape[2]

    @property
    def category_labels(self) -> np.ndarray:
        return self.exemplar_labels // EXEMPLARS_PER_CATEGORY

    def labels_for(self, n_classes: int) -> np.ndarray:
        if n_classes == N_CATEGORIES:
            return self.category_labels
        if n_classes == N_EXEMPLARS:
            return self.exemplar_labels
        raise ValueError(f"n_classes must be {N_CATEGORIES} or {N_EXEMPLARS}, got {n_classes}")

    def validate(self, model_ready: bool = False) -> None:
        if self.trials.ndim != 3:
            raise DatasetInvariantError(f"trials must be 3-D, got shape {self.trials.shape}")
        if self.exemplar_labels.shape != (self.n_trials,):
            raise DatasetInvariantError("one exemplar label per trial required")
        if self.n_trials and (self.exemplar_labels.min() < 0 or self.exemplar_labels.max() >= N_EXEMPLARS):
            raise LabelRangeError(f"exemplar labels must lie in [0, {N_EXEMPLARS})")
        if len(self.channel_names) != self.n_channels:
            raise DatasetInvariantError("channel_names length must equal n_channels")
        if not np.isfinite(self.trials).all():
            raise DatasetInvariantError("trial data contains non-finite values")
        if model_ready and (self.n_channels != MODEL_CHANNELS or self.n_samples != MODEL_SAMPLES):
            raise DatasetInvariantError(
                f"model-ready datasets are {MODEL_CHANNELS}x{MODEL_SAMPLES}, "
                f"got {self.n_channels}x{self.n_samples}")


def dataset_write(ds: EegDataset, path) -> None:
    """Refuses to write a dataset that violates its invariants."""
    ds.validate()
    header = json.dumps({
        "subject_id": ds.subject_id,
        "n_trials": int(ds.n_trials),
        "n_channels": int(ds.n_channels),
        "n_samples": int(ds.n_samples),
        "sampling_rate_hz": float(ds.sampling_rate_hz),
        "channel_names": list(ds.channel_names),
        "label_encoding": "u16 exemplar ids 0..71; category = exemplar // 12",
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(ds.exemplar_labels, dtype="<u2").tobytes())
        fh.write(np.ascontiguousarray(ds.trials, dtype="<f4").tobytes())


def dataset_read(path) -> EegDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise MagicError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 10:
        raise TruncatedError("file shorter than fixed header")
    version, hlen = struct.unpack("<HI", blob[4:10])
    if version != VERSION:
        raise VersionError(f"container version {version}, reader supports {VERSION}")
    if len(blob) < 10 + hlen:
        raise TruncatedError("truncated JSON header")
    try:
        header = json.loads(blob[10:10 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"corrupt JSON header: {exc}") from exc
    n_trials = header["n_trials"]
    n_channels = header["n_channels"]
    n_samples = header["n_samples"]

    offset = 10 + hlen
    labels_bytes = n_trials * 2
    payload_bytes = n_trials * n_channels * n_samples * 4
    if len(blob) != offset + labels_bytes + payload_bytes:
        raise TruncatedError(
            f"payload is {len(blob) - offset} bytes, expected {labels_bytes + payload_bytes}")
    labels = np.frombuffer(blob[offset:offset + labels_bytes], dtype="<u2").astype(np.int64)
    if n_trials and labels.max() >= N_EXEMPLARS:
        raise LabelRangeError(f"exemplar label {labels.max()} outside [0, {N_EXEMPLARS})")
    data = np.frombuffer(blob[offset + labels_bytes:], dtype="<f4")
    data = data.reshape(n_trials, n_channels, n_samples).copy()

    ds = EegDataset(data, labels, header["channel_names"],
                    header["sampling_rate_hz"], header["subject_id"])
    ds.validate()
    return ds


# ---- channel masks ---------------------------------------------------------

@dataclass(frozen=True)
class MaskSpec:
    """Named retained-channel subset driving the attention branch."""
    name: str
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("mask must retain at least one channel")
        if len(set(idx)) != len(idx):
            raise ValueError("mask indices must be unique")
        if min(idx) < 0 or max(idx) >= MODEL_CHANNELS:
            raise ValueError(f"mask indices must lie in [0, {MODEL_CHANNELS})")
        object.__setattr__(self, "indices", idx)

    def to_dict(self) -> dict:
        return {"name": self.name, "indices": list(self.indices)}


def mask_write(mask: MaskSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(mask.to_dict(), fh, indent=1, sort_keys=True)


def mask_read(path) -> MaskSpec:
    with open(path) as fh:
        payload = json.load(fh)
    return MaskSpec(payload["name"], tuple(payload["indices"]))


def default_occipital_mask() -> MaskSpec:
    """The shipped posterior-channel default (a JSON sidecar, not code)."""
    ref = importlib.resources.files("eegdecode") / "masks" / "occipital_default.json"
    payload = json.loads(ref.read_text())
    return MaskSpec(payload["name"], tuple(payload["indices"]))


def apply_mask(x: np.ndarray, mask: MaskSpec) -> np.ndarray:
    """Zero all channels outside the mask; shape is preserved.

    Works on any array whose second-to-last axis is the channel axis.
    Retained rows are copied verbatim (bit-exact), the rest are +0.0, so
    the output is bitwise invariant to non-retained channel content.
    """
    idx = list(mask.indices)
    out = np.zeros_like(x)
    out[..., idx, :] = x[..., idx, :]
    return out


# ---- synthetic evoked data -------------------------------------------------

@dataclass(frozen=True)
class CategoryTemplate:
    """A Gaussian temporal bump on a fixed set of focus channels."""
    latency: int
    duration: int
    channels: tuple
    amplitude: float = 1.0


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings for verification datasets.

    Each of the 72 exemplars inherits its category template plus a
    deterministic exemplar-specific jitter: an amplitude factor, an
    integer latency shift, and a boosted signature channel chosen from
    the category's focus set.  White noise is scaled per channel so the
    focus channels sit at ``snr`` and all other channels at
    ``off_focus_snr`` (defaults to ``snr``).
    """
    trials_per_exemplar: int
    snr: float
    templates: tuple
    amplitude_jitter: float = 0.25
    latency_jitter: int = 1
    signature_boost: float = 1.0
    off_focus_snr: float | None = None
    seed: int = 0
    subject_id: str = "synth"

    def __post_init__(self):
        if len(self.templates) != N_CATEGORIES:
            raise ValueError(f"need {N_CATEGORIES} category templates")
        if self.snr <= 0 or (self.off_focus_snr is not None and self.off_focus_snr <= 0):
            raise ValueError("snr must be positive")
        if self.trials_per_exemplar < 1:
            raise ValueError("trials_per_exemplar must be >= 1")
        for t in self.templates:
            if t.latency - self.latency_jitter < 0 or t.latency + t.duration + self.latency_jitter > MODEL_SAMPLES:
                raise ValueError(f"template bump (latency {t.latency}, duration {t.duration}) "
                                 f"plus jitter must fit in {MODEL_SAMPLES} samples")

    def to_dict(self) -> dict:
        return {
            "trials_per_exemplar": self.trials_per_exemplar,
            "snr": self.snr,
            "templates": [{"latency": t.latency, "duration": t.duration,
                           "channels": list(t.channels), "amplitude": t.amplitude}
                          for t in self.templates],
            "amplitude_jitter": self.amplitude_jitter,
            "latency_jitter": self.latency_jitter,
            "signature_boost": self.signature_boost,
            "off_focus_snr": self.off_focus_snr,
            "seed": self.seed,
            "subject_id": self.subject_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        templates = tuple(CategoryTemplate(t["latency"], t["duration"],
                                           tuple(t["channels"]), t.get("amplitude", 1.0))
                          for t in d["templates"])
        return cls(trials_per_exemplar=d["trials_per_exemplar"], snr=d["snr"],
                   templates=templates,
                   amplitude_jitter=d.get("amplitude_jitter", 0.25),
                   latency_jitter=d.get("latency_jitter", 1),
                   signature_boost=d.get("signature_boost", 1.0),
                   off_focus_snr=d.get("off_focus_snr"),
                   seed=d.get("seed", 0),
                   subject_id=d.get("subject_id", "synth"))


def default_templates(mask: MaskSpec | None = None) -> tuple:
    """Six latency-staggered templates over posterior channels.

    All categories share the mask's focus channels (first 12 of the mask)
    and are separated in time; exemplars are separated by their signature
    channel, so the discriminative signal lives entirely inside the mask.
    """
    mask = mask or default_occipital_mask()
    focus = tuple(mask.indices[:EXEMPLARS_PER_CATEGORY])
    return tuple(CategoryTemplate(latency=4 + 3 * c, duration=8, channels=focus, amplitude=1.0)
                 for c in range(N_CATEGORIES))


def default_synth_config(trials_per_exemplar: int = 3, snr: float = 10.0, seed: int = 0,
                         subject_id: str = "synth", **overrides) -> SynthConfig:
    return SynthConfig(trials_per_exemplar=trials_per_exemplar, snr=snr,
                       templates=default_templates(), seed=seed,
                       subject_id=subject_id, **overrides)


def _bump(center: float, sigma: float) -> np.ndarray:
    t = np.arange(MODEL_SAMPLES, dtype=np.float64)
    return np.exp(-0.5 * ((t - center) / sigma) ** 2)


def synth_templates(cfg: SynthConfig) -> np.ndarray:
    """Noise-free per-exemplar templates [72, channels, samples].

    This is the ground truth a matched-filter oracle correlates against.
    """
    out = np.zeros((N_EXEMPLARS, MODEL_CHANNELS, MODEL_SAMPLES), dtype=np.float64)
    for e in range(N_EXEMPLARS):
        cat = e // EXEMPLARS_PER_CATEGORY
        member = e % EXEMPLARS_PER_CATEGORY
        tpl = cfg.templates[cat]
        jrng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 101, e]))
        amp = tpl.amplitude * (1.0 + cfg.amplitude_jitter * jrng.uniform(-1.0, 1.0))
        shift = int(jrng.integers(-cfg.latency_jitter, cfg.latency_jitter + 1)) if cfg.latency_jitter else 0
        center = tpl.latency + shift + tpl.duration / 2.0
        wave = _bump(center, tpl.duration / 4.0)
        rows = np.asarray(tpl.channels)
        out[e, rows, :] = amp * wave
        signature = tpl.channels[member % len(tpl.channels)]
        out[e, signature, :] *= (1.0 + cfg.signature_boost)
    return out


def synth_generate(cfg: SynthConfig) -> EegDataset:
    """Deterministic synthetic dataset, bitwise reproducible per seed."""
    templates = synth_templates(cfg)
    focus = sorted({ch for t in cfg.templates for ch in t.channels})
    base_amp = float(np.mean([t.amplitude for t in cfg.templates]))
    sigma = np.full(MODEL_CHANNELS, base_amp / (cfg.off_focus_snr or cfg.snr))
    sigma[focus] = base_amp / cfg.snr

    n = cfg.trials_per_exemplar
    noise_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 202]))
    trials = np.empty((N_EXEMPLARS * n, MODEL_CHANNELS, MODEL_SAMPLES), dtype=np.float32)
    labels = np.empty(N_EXEMPLARS * n, dtype=np.int64)
    row = 0
    for e in range(N_EXEMPLARS):
        for _ in range(n):
            noise = noise_rng.standard_normal((MODEL_CHANNELS, MODEL_SAMPLES)) * sigma[:, None]
            trials[row] = (templates[e] + noise).astype(np.float32)
            labels[row] = e
            row += 1
    ds = EegDataset(trials, labels, [f"E{i + 1}" for i in range(MODEL_CHANNELS)],
                    62.5, cfg.subject_id)
    ds.validate(model_ready=True)
    return ds
