"""Burst acquisition and spectral fingerprint extraction.

Turns raw I/Q captures into fixed-length log-spectrum feature vectors and
assembles labeled datasets by running the full transmit/receive pipeline for
a population of device profiles.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as sp_signal

from .signal_model import (
    AdcConfig,
    ChannelConfig,
    IqCapture,
    DeviceProfile,
    adc_sample,
    apply_awgn,
    generate_preamble,
    preamble_length,
)

_DATASET_MAGIC = b"RFPD"
_POWER_FLOOR = 1e-30  # keeps dB features finite for identically-zero bins


@dataclass
class FeatureVector:
    """One log-spectrum fingerprint: per-bin power in dB plus identity label."""

    values: np.ndarray
    label: int = -1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("values must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")


@dataclass
class DatasetMeta:
    fs_hz: float = 0.0
    n_fft: int = 0
    snr_db: float | str = 0.0
    q_bits: int = 0
    class_ids: list = field(default_factory=list)


@dataclass
class FingerprintDataset:
    """Feature matrix (n_samples x n_bins) with integer labels and pipeline meta.

    Labels are contiguous class indices 0..C-1; meta.class_ids maps each index
    back to the originating device_id.
    """

    features: np.ndarray
    labels: np.ndarray
    meta: DatasetMeta = field(default_factory=DatasetMeta)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D (n_samples x n_bins)")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match feature rows")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_bins(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return np.unique(self.labels).size


@dataclass
class PipelineConfig:
    """End-to-end capture pipeline settings shared by dataset builders.

    lead_pad is an inclusive range of noise-only samples prepended before the
    burst (drawn per capture); adc_backoff_db is a front-end gain backoff
    applied before quantization so rail peaks sit below full scale.
    """

    fs_hz: float = 4.0e6
    n_symbols: int = 8
    snr_db: float | str = 24.0
    snr_ref_fs_hz: float | None = None
    q_bits: int = 14
    full_scale_vpp: float = 2.0
    n_fft: int = 512
    threshold_factor: float = 6.0
    lead_pad: tuple = (16, 144)
    tail_pad: int = 32
    adc_backoff_db: float = 3.0

    def effective_snr_db(self) -> float | str:
        """SNR after optional noise-bandwidth scaling.

        When snr_ref_fs_hz is set, snr_db is interpreted at that rate and the
        noise power grows proportionally with fs_hz (fixed noise density).
        """
        if isinstance(self.snr_db, str) or self.snr_ref_fs_hz is None:
            return self.snr_db
        return float(self.snr_db) - 10.0 * np.log10(self.fs_hz / self.snr_ref_fs_hz)

    def adc(self) -> AdcConfig:
        return AdcConfig(q_bits=self.q_bits, full_scale_vpp=self.full_scale_vpp,
                         fs_hz=self.fs_hz)

    def window(self) -> int:
        return preamble_length(self.fs_hz, self.n_symbols)


def acquire(capture: IqCapture, window: int, threshold_factor: float = 6.0) -> IqCapture:
    """Locate the burst and return exactly `window` samples from its onset.

    Short-term power (trailing 16-sample mean) is compared against
    threshold_factor times a noise-floor estimate, the minimum mean power
    over non-overlapping 16-sample blocks (robust even when the burst fills
    most of the record). If no crossing occurs the maximum-energy window is
    returned instead and diagnostics["onset_flagged"] is set.
    """
    n = len(capture)
    if not 1 <= window <= n:
        raise ValueError(f"window must be in [1, {n}]: {window}")
    if threshold_factor <= 0:
        raise ValueError("threshold_factor must be positive")

    power = np.abs(capture.samples) ** 2
    w = min(16, window)
    csum = np.concatenate(([0.0], np.cumsum(power)))
    # trailing w-sample means, evaluated only where a full window exists so a
    # lone noise spike at the record start cannot fake an onset
    short_term = (csum[w:] - csum[:-w]) / w

    n_blocks = n // w
    if n_blocks >= 1:
        blocks = power[: n_blocks * w].reshape(n_blocks, w).mean(axis=1)
        noise_floor = float(blocks.min())
    else:
        noise_floor = float(power.mean())
    threshold = threshold_factor * noise_floor

    crossings = np.flatnonzero(short_term > threshold)
    flagged = crossings.size == 0
    if flagged:
        energy = csum[window:] - csum[:-window]
        onset = int(np.argmax(energy))
    else:
        # short_term[i] covers samples [i, i+w-1]; the crossing window's last
        # sample is the first one carrying burst power
        onset = int(crossings[0]) + w - 1
    onset = min(onset, n - window)

    diags = dict(capture.diagnostics)
    diags["onset_index"] = onset
    diags["onset_flagged"] = flagged
    return IqCapture(capture.samples[onset:onset + window].copy(),
                     capture.fs_hz, capture.true_id, diags)


def _validate_n_fft(n_fft: int) -> None:
    if not (isinstance(n_fft, (int, np.integer)) and 64 <= n_fft <= 4096
            and (n_fft & (n_fft - 1)) == 0):
        raise ValueError(f"n_fft must be a power of two in [64, 4096]: {n_fft}")


def extract_spectral_feature(capture: IqCapture, n_fft: int) -> FeatureVector:
    """Welch log-spectrum fingerprint of a capture.

    Hann window, 50% segment overlap, two-sided spectrum in FFT bin order
    (DC first) so I/Q asymmetries are preserved. Captures shorter than n_fft
    are zero-padded to a single segment. The linear-power bins sum to the mean
    power of the (possibly padded) input; returned values are 10*log10 of the
    per-bin power.
    """
    _validate_n_fft(n_fft)
    x = capture.samples
    if x.size < n_fft:
        x = np.concatenate([x, np.zeros(n_fft - x.size, dtype=x.dtype)])
    _, psd = sp_signal.welch(
        x, fs=capture.fs_hz, window="hann", nperseg=n_fft, noverlap=n_fft // 2,
        nfft=n_fft, detrend=False, return_onesided=False, scaling="density")
    bin_power = psd * (capture.fs_hz / n_fft)
    values = 10.0 * np.log10(np.maximum(bin_power, _POWER_FLOOR))
    label = -1 if capture.true_id is None else int(capture.true_id)
    return FeatureVector(values=values, label=label)


def feature_bin_frequencies(n_fft: int, fs_hz: float) -> np.ndarray:
    """Center frequency of each feature bin, in the same FFT order as extract."""
    return np.fft.fftfreq(n_fft, d=1.0 / fs_hz)


def build_dataset(profiles: list[DeviceProfile], per_class: int,
                  pipeline: PipelineConfig, master_seed: int = 0) -> FingerprintDataset:
    """Run the full pipeline for every device and assemble a labeled dataset.

    Each capture is the device preamble embedded in a noise-only lead-in/out,
    passed through AWGN, front-end backoff, the ADC, burst acquisition, and
    spectral extraction. Per-capture randomness (lead-in length, noise) is
    seeded by hashing (master_seed, device_id, sample index), so results are
    identical regardless of evaluation order.
    """
    if len(profiles) < 2:
        raise ValueError("need at least 2 device profiles")
    ids = [p.device_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("device_id values must be unique")
    if per_class < 2:
        raise ValueError("per_class must be >= 2")

    ordered = sorted(profiles, key=lambda p: p.device_id)
    window = pipeline.window()
    _validate_n_fft(pipeline.n_fft)
    adc = pipeline.adc()
    snr = pipeline.effective_snr_db()
    backoff = 10.0 ** (-pipeline.adc_backoff_db / 20.0)
    lead_lo, lead_hi = pipeline.lead_pad
    if not (0 <= lead_lo <= lead_hi):
        raise ValueError(f"invalid lead_pad range: {pipeline.lead_pad}")

    n_rows = len(ordered) * per_class
    features = np.empty((n_rows, pipeline.n_fft))
    labels = np.empty(n_rows, dtype=np.int64)

    row = 0
    for ci, prof in enumerate(ordered):
        burst = generate_preamble(prof, pipeline.fs_hz, pipeline.n_symbols)
        for k in range(per_class):
            ss = np.random.SeedSequence(master_seed, spawn_key=(prof.device_id, k))
            pad_seq, noise_seq = ss.spawn(2)
            lead = int(np.random.default_rng(pad_seq).integers(lead_lo, lead_hi + 1))
            padded = np.concatenate([
                np.zeros(lead, dtype=np.complex128),
                burst.samples,
                np.zeros(pipeline.tail_pad, dtype=np.complex128),
            ])
            cap = IqCapture(padded, pipeline.fs_hz, prof.device_id)
            noise_seed = int(noise_seq.generate_state(1, np.uint64)[0])
            cap = apply_awgn(cap, ChannelConfig(snr, noise_seed), signal_power=1.0)
            cap = IqCapture(cap.samples * backoff, cap.fs_hz, cap.true_id, cap.diagnostics)
            cap = adc_sample(cap, adc)
            cap = acquire(cap, window, pipeline.threshold_factor)
            features[row] = extract_spectral_feature(cap, pipeline.n_fft).values
            labels[row] = ci
            row += 1

    meta = DatasetMeta(fs_hz=pipeline.fs_hz, n_fft=pipeline.n_fft,
                       snr_db=snr, q_bits=pipeline.q_bits,
                       class_ids=[p.device_id for p in ordered])
    return FingerprintDataset(features, labels, meta)


def save_dataset(ds: FingerprintDataset, path) -> None:
    """Binary dataset container: header (n_rows, n_bins, meta) + float32 rows + labels."""
    meta_json = json.dumps({
        "fs_hz": ds.meta.fs_hz,
        "n_fft": ds.meta.n_fft,
        "snr_db": ds.meta.snr_db,
        "q_bits": ds.meta.q_bits,
        "class_ids": list(map(int, ds.meta.class_ids)),
    }).encode()
    with open(path, "wb") as fh:
        fh.write(_DATASET_MAGIC)
        fh.write(struct.pack("<QQI", ds.n_samples, ds.n_bins, len(meta_json)))
        fh.write(meta_json)
        fh.write(ds.features.astype("<f4").tobytes())
        fh.write(ds.labels.astype("<i4").tobytes())


def load_dataset(path) -> FingerprintDataset:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DATASET_MAGIC:
            raise ValueError(f"not a dataset file (bad magic): {path}")
        n_rows, n_bins, meta_len = struct.unpack("<QQI", fh.read(20))
        meta_d = json.loads(fh.read(meta_len).decode())
        feats = np.frombuffer(fh.read(n_rows * n_bins * 4), dtype="<f4")
        labels = np.frombuffer(fh.read(n_rows * 4), dtype="<i4")
    if feats.size != n_rows * n_bins or labels.size != n_rows:
        raise ValueError(f"dataset payload size mismatch in {path}")
    meta = DatasetMeta(fs_hz=meta_d["fs_hz"], n_fft=meta_d["n_fft"],
                       snr_db=meta_d["snr_db"], q_bits=meta_d["q_bits"],
                       class_ids=meta_d["class_ids"])
    return FingerprintDataset(feats.reshape(n_rows, n_bins).astype(np.float64),
                              labels.astype(np.int64), meta)


def dataset_to_csv(ds: FingerprintDataset, path) -> None:
    """One row per sample, feature bins first, integer label last."""
    with open(path, "w", newline="") as fh:
        cols = [f"bin_{m}" for m in range(ds.n_bins)] + ["label"]
        fh.write(",".join(cols) + "\n")
        for i in range(ds.n_samples):
            vals = [repr(float(v)) for v in ds.features[i]]
            fh.write(",".join(vals + [str(int(ds.labels[i]))]) + "\n")
