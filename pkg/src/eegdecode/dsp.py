"""Filter design and signal conditioning for the 1000 Hz -> 62.5 Hz chain.

The preprocessing order is: 1 Hz high-pass (4th-order Butterworth),
25 Hz low-pass (8th-order Chebyshev I), decimate by 16, epoch into
channels x 32 windows at the stimulus markers.  Filtering is causal
single-pass by default; a zero-phase variant exists behind a flag.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from .datamodel import EegDataset


class FilterDesignError(ValueError):
    pass


@dataclass(frozen=True)
class BiquadSection:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])


@dataclass(frozen=True)
class BiquadCascade:
    """Second-order sections applied in sequence; denominators are monic."""
    sections: tuple
    gain: float = 1.0

    @classmethod
    def from_sos(cls, sos: np.ndarray) -> "BiquadCascade":
        secs = []
        for b0, b1, b2, a0, a1, a2 in np.atleast_2d(sos):
            secs.append(BiquadSection(b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0))
        return cls(tuple(secs))

    def as_sos(self) -> np.ndarray:
        rows = [[s.b0, s.b1, s.b2, 1.0, s.a1, s.a2] for s in self.sections]
        rows[0] = [c * self.gain for c in rows[0][:3]] + rows[0][3:]
        return np.asarray(rows, dtype=np.float64)

    def is_stable(self) -> bool:
        return all(np.all(np.abs(s.poles()) < 1.0) for s in self.sections)

    def frequency_response(self, freq_hz, fs_hz: float) -> np.ndarray:
        """Complex response at the given frequencies (Hz)."""
        w = 2.0 * np.pi * np.asarray(freq_hz, dtype=np.float64) / fs_hz
        zinv = np.exp(-1j * w)
        h = np.full_like(zinv, self.gain, dtype=np.complex128)
        for s in self.sections:
            h *= (s.b0 + s.b1 * zinv + s.b2 * zinv ** 2) / (1.0 + s.a1 * zinv + s.a2 * zinv ** 2)
        return h

    def magnitude(self, freq_hz, fs_hz: float) -> np.ndarray:
        return np.abs(self.frequency_response(freq_hz, fs_hz))


@dataclass
class Marker:
    sample: int
    exemplar: int


@dataclass
class ContinuousRecording:
    """Channels x samples signal with stimulus-onset markers."""
    data: np.ndarray
    sampling_rate_hz: float
    markers: list
    subject_id: str = "unknown"
    channel_names: list = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"recording must be channels x samples, got {self.data.shape}")
        if not self.channel_names:
            self.channel_names = [f"E{i + 1}" for i in range(self.data.shape[0])]
        last = -1
        for m in self.markers:
            if not 0 <= m.sample < self.data.shape[1]:
                raise ValueError(f"marker at sample {m.sample} outside recording of {self.data.shape[1]} samples")
            if m.sample <= last:
                raise ValueError("markers must be strictly increasing")
            last = m.sample

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def _check_cutoff(cutoff_hz: float, fs_hz: float):
    if not 0 < cutoff_hz < fs_hz / 2:
        raise FilterDesignError(f"cutoff {cutoff_hz} Hz outside (0, {fs_hz / 2}) for fs={fs_hz}")


def design_butterworth_highpass(cutoff_hz: float = 1.0, fs_hz: float = 1000.0,
                                order: int = 4) -> BiquadCascade:
    """Maximally flat high-pass via bilinear transform with prewarping."""
    _check_cutoff(cutoff_hz, fs_hz)
    sos = signal.butter(order, cutoff_hz, btype="highpass", fs=fs_hz, output="sos")
    cascade = BiquadCascade.from_sos(sos)
    assert cascade.is_stable()
    return cascade


def design_chebyshev1_lowpass(cutoff_hz: float = 25.0, fs_hz: float = 1000.0,
                              order: int = 8, ripple_db: float = 1.0) -> BiquadCascade:
    """Equiripple-passband low-pass; ripple_db defaults to 1 dB."""
    _check_cutoff(cutoff_hz, fs_hz)
    if ripple_db <= 0:
        raise FilterDesignError(f"ripple must be positive, got {ripple_db} dB")
    sos = signal.cheby1(order, ripple_db, cutoff_hz, btype="lowpass", fs=fs_hz, output="sos")
    cascade = BiquadCascade.from_sos(sos)
    assert cascade.is_stable()
    return cascade


def filter_apply(rec: ContinuousRecording, cascade: BiquadCascade,
                 zero_phase: bool = False) -> ContinuousRecording:
    """Per-channel filtering (direct-form II transposed, zero initial state).

    ``zero_phase=True`` switches to forward-backward filtering; the
    default reproduces a causal single-pass filter.
    """
    if rec.n_samples == 0:
        return rec
    sos = cascade.as_sos()
    if zero_phase:
        out = signal.sosfiltfilt(sos, rec.data, axis=1)
    else:
        out = signal.sosfilt(sos, rec.data, axis=1)
    return replace(rec, data=np.ascontiguousarray(out), markers=list(rec.markers))


def decimate(rec: ContinuousRecording, factor: int = 16) -> ContinuousRecording:
    """Keep every ``factor``-th sample starting at index 0.

    The caller is responsible for having applied the anti-alias low-pass
    first; marker indices are divided with floor.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError(f"decimation factor must be a positive integer, got {factor}")
    factor = int(factor)
    markers = [Marker(m.sample // factor, m.exemplar) for m in rec.markers]
    dedup = []
    for m in markers:
        if dedup and m.sample <= dedup[-1].sample:
            continue
        dedup.append(m)
    return ContinuousRecording(rec.data[:, ::factor].copy(), rec.sampling_rate_hz / factor,
                               dedup, rec.subject_id, list(rec.channel_names))


def epoch(rec: ContinuousRecording, window_samples: int = 32):
    """One trial per marker, channels x window, label = marker exemplar id.

    Markers with fewer than ``window_samples`` remaining are dropped;
    returns (dataset, dropped_count).
    """
    trials, labels = [], []
    dropped = 0
    for m in rec.markers:
        if m.sample + window_samples > rec.n_samples:
            dropped += 1
            continue
        trials.append(rec.data[:, m.sample:m.sample + window_samples].astype(np.float32))
        labels.append(m.exemplar)
    data = np.stack(trials) if trials else np.zeros((0, rec.n_channels, window_samples), np.float32)
    ds = EegDataset(trials=data,
                    exemplar_labels=np.asarray(labels, dtype=np.int64),
                    channel_names=list(rec.channel_names),
                    sampling_rate_hz=rec.sampling_rate_hz,
                    subject_id=rec.subject_id)
    return ds, dropped


def preprocess_chain(rec: ContinuousRecording, hp_cutoff_hz: float = 1.0, hp_order: int = 4,
                     lp_cutoff_hz: float = 25.0, lp_order: int = 8, ripple_db: float = 1.0,
                     decim_factor: int = 16, window_samples: int = 32,
                     zero_phase: bool = False):
    """Full high-pass -> low-pass -> decimate -> epoch chain.

    Returns (dataset, info) where info carries the designed coefficients
    and the dropped-trial count for the run manifest.
    """
    hp = design_butterworth_highpass(hp_cutoff_hz, rec.sampling_rate_hz, hp_order)
    lp = design_chebyshev1_lowpass(lp_cutoff_hz, rec.sampling_rate_hz, lp_order, ripple_db)
    filtered = filter_apply(filter_apply(rec, hp, zero_phase), lp, zero_phase)
    decimated = decimate(filtered, decim_factor)
    ds, dropped = epoch(decimated, window_samples)
    info = {
        "highpass_sos": hp.as_sos().tolist(),
        "lowpass_sos": lp.as_sos().tolist(),
        "ripple_db": ripple_db,
        "zero_phase": zero_phase,
        "decimation_factor": decim_factor,
        "output_rate_hz": decimated.sampling_rate_hz,
        "dropped_trials": dropped,
    }
    return ds, info


# ---- raw continuous-recording container -----------------------------------

RAW_MAGIC = b"EEGR"
RAW_VERSION = 1


def write_recording(path, rec: ContinuousRecording) -> None:
    header = json.dumps({
        "subject_id": rec.subject_id,
        "n_channels": rec.n_channels,
        "n_samples": rec.n_samples,
        "sampling_rate_hz": rec.sampling_rate_hz,
        "channel_names": rec.channel_names,
        "n_markers": len(rec.markers),
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<HI", RAW_VERSION, len(header)))
        fh.write(header)
        for m in rec.markers:
            fh.write(struct.pack("<QH", m.sample, m.exemplar))
        fh.write(np.ascontiguousarray(rec.data, dtype="<f4").tobytes())


def read_recording(path) -> ContinuousRecording:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != RAW_MAGIC:
        raise ValueError(f"bad raw-recording magic {blob[:4]!r}")
    version, hlen = struct.unpack("<HI", blob[4:10])
    if version != RAW_VERSION:
        raise ValueError(f"unsupported raw-recording version {version}")
    try:
        header = json.loads(blob[10:10 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupt raw-recording header: {exc}") from exc
    offset = 10 + hlen
    markers = []
    for _ in range(header["n_markers"]):
        sample, exemplar = struct.unpack("<QH", blob[offset:offset + 10])
        markers.append(Marker(sample, exemplar))
        offset += 10
    n_ch, n_s = header["n_channels"], header["n_samples"]
    data = np.frombuffer(blob[offset:offset + n_ch * n_s * 4], dtype="<f4").reshape(n_ch, n_s)
    return ContinuousRecording(data.astype(np.float64), header["sampling_rate_hz"],
                               markers, header["subject_id"], header["channel_names"])
