"""Synthetic ECG / iEEG recordings, 4-second windowing and dataset splits.

The synthetic family is colored (1/f) background noise, a patient-level
rhythm, white measurement noise and, inside each preictal stretch, an
amplitude-modulated oscillation at ``rhythm + delta_hz``.  The depth of that
oscillation is the separability knob: depth 0 makes the classes identical.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as sps

from .errors import ConfigurationError, InsufficientDataError

log = logging.getLogger(__name__)

WINDOW_S = 4
DEFAULT_HORIZON_S = 3600.0
DEFAULT_EXCLUSION_S = 600.0

EEG_BANDS = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
    "gamma": (30.0, 100.0),
}


class Modality(enum.IntEnum):
    ECG = 0
    IEEG = 1

    @classmethod
    def parse(cls, value) -> "Modality":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(value)


class Label(enum.IntEnum):
    INTERICTAL = 0
    PREICTAL = 1


@dataclass(frozen=True)
class BackgroundSpectrum:
    """1/f^exponent power spectrum with optional per-band power gains."""

    exponent: float = 1.0
    band_gains: dict = field(default_factory=dict)
    amplitude: float = 1.0

    def amplitude_response(self, freqs: np.ndarray) -> np.ndarray:
        f = np.maximum(freqs, freqs[1] if freqs.size > 1 else 1.0)
        amp = f ** (-self.exponent / 2)
        for band, gain in self.band_gains.items():
            lo, hi = EEG_BANDS[band] if isinstance(band, str) else band
            amp[(freqs >= lo) & (freqs < hi)] *= math.sqrt(gain)
        amp[0] = 0.0
        return amp


@dataclass(frozen=True)
class PreictalShift:
    depth: float = 1.0
    delta_hz: float | None = None
    modulation_hz: float = 0.25

    PRESETS = {"none": 0.0, "hard": 0.15, "moderate": 0.4, "separable": 1.0}

    @classmethod
    def preset(cls, name: str, **kw) -> "PreictalShift":
        try:
            return cls(depth=cls.PRESETS[name], **kw)
        except KeyError:
            raise ConfigurationError(f"unknown preictal_shift preset {name!r}") from None


# modality -> (rhythm frequency Hz, default preictal frequency offset Hz)
RHYTHMS = {Modality.ECG: (1.2, 0.5), Modality.IEEG: (10.0, 5.0)}


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    imbalance_ratio: float = 0.0826
    onset_count: int = 1
    sample_rate_hz: int = 256
    background_spectrum: BackgroundSpectrum = field(default_factory=BackgroundSpectrum)
    preictal_shift: PreictalShift = field(default_factory=PreictalShift)
    noise_floor: float = 0.1
    rhythm_amplitude: float = 1.0
    horizon_s: float = DEFAULT_HORIZON_S
    exclusion_s: float = DEFAULT_EXCLUSION_S

    def __post_init__(self):
        if not 0.020 <= self.imbalance_ratio <= 0.233:
            raise ConfigurationError("imbalance_ratio must lie in [0.020, 0.233]")
        if self.onset_count < 0:
            raise ConfigurationError("onset_count must be non-negative")
        if self.sample_rate_hz <= 0:
            raise ConfigurationError("sample_rate_hz must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def shift_frequency(self, modality) -> float:
        f0, delta = RHYTHMS[Modality.parse(modality)]
        d = self.preictal_shift.delta_hz
        return f0 + (delta if d is None else d)


@dataclass(eq=False)
class Recording:
    patient_id: str
    modality: Modality
    sample_rate_hz: int
    samples: np.ndarray  # (channels, n) float32
    seizure_onsets: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.modality = Modality.parse(self.modality)
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float32))
        self.seizure_onsets = np.asarray(self.seizure_onsets, dtype=np.float64).ravel()
        if self.sample_rate_hz <= 0:
            raise ConfigurationError("sample_rate_hz must be positive")
        if self.modality is Modality.ECG and self.channel_count != 1:
            raise ConfigurationError("ECG recordings have exactly one channel")
        if np.any(np.diff(self.seizure_onsets) <= 0):
            raise ConfigurationError("seizure onsets must be strictly increasing")
        if self.seizure_onsets.size and (self.seizure_onsets[0] < 0 or self.seizure_onsets[-1] > self.duration_s):
            raise ConfigurationError("seizure onsets must lie within the recording")

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_count(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.sample_count / self.sample_rate_hz

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (self.patient_id == other.patient_id and self.modality == other.modality
                and self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.seizure_onsets, other.seizure_onsets)
                and self.samples.shape == other.samples.shape
                and self.samples.tobytes() == other.samples.tobytes())


@dataclass(eq=False)
class SampleWindow:
    start_time: float
    channels: np.ndarray  # (channels, 4 * sample_rate)
    label: Label
    sample_rate_hz: int

    @property
    def duration(self) -> float:
        return self.channels.shape[1] / self.sample_rate_hz


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------

def duration_for_ratio(cfg: GeneratorConfig) -> float:
    """Recording length (s) whose labeled windows hit ``cfg.imbalance_ratio``."""
    if cfg.onset_count == 0:
        raise ConfigurationError("the ratio is undefined without onsets")
    k = cfg.onset_count
    interictal = k * cfg.horizon_s / cfg.imbalance_ratio
    total = interictal + k * (cfg.horizon_s + cfg.exclusion_s)
    return float(math.ceil(total / WINDOW_S) * WINDOW_S)


def place_onsets(cfg: GeneratorConfig, duration_s: float) -> np.ndarray:
    """Seeded onset times on the 4 s grid, one preictal + exclusion block each.

    The interictal time left over is split among the gaps before each block
    and the tail, so the labeled ratio matches the target when ``duration_s``
    comes from :func:`duration_for_ratio`.
    """
    k = cfg.onset_count
    if k == 0:
        return np.zeros(0)
    block = cfg.horizon_s + cfg.exclusion_s
    spare = duration_s - k * block
    if spare < 0:
        raise ConfigurationError(f"{k} onsets need at least {k * block:.0f} s, got {duration_s:.0f} s")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x0505]))
    weights = rng.dirichlet(np.full(k + 1, 4.0))
    gaps = np.floor(weights * spare / WINDOW_S) * WINDOW_S
    onsets = []
    t = 0.0
    for i in range(k):
        t += gaps[i] + cfg.horizon_s
        onsets.append(t)
        t += cfg.exclusion_s
    achieved = expected_ratio(duration_s, onsets, cfg.horizon_s, cfg.exclusion_s)
    if abs(achieved / cfg.imbalance_ratio - 1) > 0.05:
        log.warning("duration %.0f s gives preictal/interictal ratio %.4f (target %.4f)",
                    duration_s, achieved, cfg.imbalance_ratio)
    return np.asarray(onsets)


def _colored_noise(rng, n, fs, spectrum: BackgroundSpectrum, block=1 << 16):
    out = np.empty(n)
    for start in range(0, n, block):
        m = min(block, n - start)
        m_fft = max(m, 2)
        freqs = np.fft.rfftfreq(m_fft, 1 / fs)
        amp = spectrum.amplitude_response(freqs)
        white = rng.standard_normal(m_fft)
        shaped = np.fft.irfft(np.fft.rfft(white) * amp, n=m_fft)
        norm = math.sqrt(np.sum(amp ** 2) * 2 / m_fft) or 1.0
        out[start:start + m] = shaped[:m] / norm
    return out * spectrum.amplitude


def _ecg_rhythm(t, f0, amplitude):
    # Narrow Gaussian R-peaks at the heart rate, plus a small T wave.
    phase = (t * f0) % 1.0
    r = np.exp(-0.5 * ((phase - 0.3) / 0.012) ** 2)
    tw = 0.25 * np.exp(-0.5 * ((phase - 0.6) / 0.05) ** 2)
    return amplitude * (r + tw - 0.062)


def generate_recording(cfg: GeneratorConfig, modality, channel_count: int, duration_s: float,
                       patient_id: str = "p0") -> Recording:
    modality = Modality.parse(modality)
    if duration_s <= 0:
        raise ConfigurationError("duration must be positive")
    if modality is Modality.ECG and channel_count != 1:
        raise ConfigurationError("ECG recordings have exactly one channel")
    if channel_count < 1:
        raise ConfigurationError("channel_count must be positive")
    if cfg.onset_count > 0 and duration_s < 2 * cfg.horizon_s:
        raise ConfigurationError("duration must be at least twice the preictal horizon")

    fs = cfg.sample_rate_hz
    n = int(round(duration_s * fs))
    onsets = place_onsets(cfg, duration_s)
    f0, _ = RHYTHMS[modality]
    f_shift = cfg.shift_frequency(modality)
    shift = cfg.preictal_shift

    samples = np.empty((channel_count, n), dtype=np.float32)
    chunk = 1 << 20
    for ch in range(channel_count):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, int(modality), ch]))
        gain = rng.uniform(0.8, 1.2) if channel_count > 1 else 1.0
        phase = rng.uniform(0, 2 * np.pi)
        shift_phase = rng.uniform(0, 2 * np.pi)
        background = _colored_noise(rng, n, fs, cfg.background_spectrum)
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            t = np.arange(start, stop) / fs
            if modality is Modality.ECG:
                x = _ecg_rhythm(t + phase / (2 * np.pi * f0), f0, cfg.rhythm_amplitude)
            else:
                x = cfg.rhythm_amplitude * np.sin(2 * np.pi * f0 * t + phase)
            x += background[start:stop]
            x += cfg.noise_floor * rng.standard_normal(stop - start)
            for o in onsets:
                pre = (t >= o - cfg.horizon_s) & (t < o)
                if shift.depth > 0 and pre.any():
                    tp = t[pre]
                    env = 1.0 + 0.5 * np.sin(2 * np.pi * shift.modulation_hz * tp)
                    x[pre] += (shift.depth * cfg.rhythm_amplitude * env
                               * np.sin(2 * np.pi * f_shift * tp + shift_phase))
                ictal = (t >= o) & (t < o + min(60.0, cfg.exclusion_s))
                if ictal.any():
                    ti = t[ictal]
                    x[ictal] += 3 * cfg.rhythm_amplitude * np.sign(np.sin(2 * np.pi * 3.0 * ti))
            samples[ch, start:stop] = gain * x
    return Recording(patient_id, modality, fs, samples, onsets)


# --------------------------------------------------------------------------
# labeling
# --------------------------------------------------------------------------

def window_labels(duration_s: float, onsets, horizon_s: float = DEFAULT_HORIZON_S,
                  exclusion_s: float = DEFAULT_EXCLUSION_S, window_s: float = WINDOW_S):
    """Start times and labels of consecutive non-overlapping windows.

    Returns ``(starts, labels)`` where label -1 marks windows overlapping a
    seizure or its postictal exclusion ``[onset, onset + exclusion_s)``.
    """
    if horizon_s <= 0:
        raise ConfigurationError("horizon must be positive")
    count = int(math.floor(duration_s / window_s + 1e-9))
    starts = np.arange(count, dtype=np.float64) * window_s
    labels = np.zeros(count, dtype=np.int8)
    for o in np.asarray(onsets, dtype=float):
        labels[(starts >= o - horizon_s) & (starts < o) & (labels == 0)] = 1
    for o in np.asarray(onsets, dtype=float):
        labels[(starts < o + exclusion_s) & (starts + window_s > o)] = -1
    return starts, labels


def label_windows(rec: Recording, horizon_s: float = DEFAULT_HORIZON_S,
                  exclusion_s: float = DEFAULT_EXCLUSION_S) -> list[SampleWindow]:
    fs = rec.sample_rate_hz
    starts, labels = window_labels(rec.sample_count / fs, rec.seizure_onsets, horizon_s, exclusion_s)
    span = WINDOW_S * fs
    out = []
    for s, lab in zip(starts, labels):
        if lab < 0:
            continue
        i = int(round(s * fs))
        out.append(SampleWindow(float(s), rec.samples[:, i:i + span], Label(int(lab)), fs))
    return out


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    """``(x, y)`` arrays of shape (n, channels, length) and (n,)."""
    if not windows:
        return np.zeros((0, 0, 0), dtype=np.float32), np.zeros(0, dtype=np.int8)
    x = np.stack([w.channels for w in windows])
    y = np.array([int(w.label) for w in windows], dtype=np.int8)
    return x, y


# --------------------------------------------------------------------------
# pre-processing
# --------------------------------------------------------------------------

def preprocess(w: SampleWindow, notch_hz: float | None = None, band=None, notch_q: float = 30.0) -> SampleWindow:
    """Optional zero-phase notch and 4th-order Butterworth band-pass.

    With neither filter configured the window is returned unchanged.
    """
    if notch_hz is None and band is None:
        return w
    fs = w.sample_rate_hz
    nyq = fs / 2
    x = np.asarray(w.channels, dtype=np.float64)
    if notch_hz is not None:
        if not 0 < notch_hz < nyq:
            raise ConfigurationError(f"notch frequency {notch_hz} Hz outside (0, {nyq}) Hz")
        # Applied as |H|^2 in the frequency domain: the zero-phase response of
        # a forward-backward pass without its start-up transient, which on a
        # 4 s window would leave several percent of a mains tone behind.
        b, a = sps.iirnotch(notch_hz, notch_q, fs=fs)
        freqs = np.fft.rfftfreq(x.shape[-1], 1 / fs)
        _, h = sps.freqz(b, a, worN=freqs, fs=fs)
        x = np.fft.irfft(np.fft.rfft(x, axis=-1) * np.abs(h) ** 2, n=x.shape[-1], axis=-1)
    if band is not None:
        lo, hi = band
        if not 0 < lo < hi < nyq:
            raise ConfigurationError(f"band {band} must satisfy 0 < lo < hi < {nyq} Hz")
        sos = sps.butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
        x = sps.sosfiltfilt(sos, x, axis=-1)
    return replace(w, channels=x.astype(w.channels.dtype, copy=False))


def standardize(x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Zero-mean, unit-variance along the last axis (per window and channel).

    Removes electrode gain and offset, which vary between recordings.
    """
    x = np.asarray(x)
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    return ((x - mu) / (sd + eps)).astype(x.dtype if x.dtype.kind == "f" else np.float64, copy=False)


# --------------------------------------------------------------------------
# splitting
# --------------------------------------------------------------------------

SPLIT_FRACTIONS = (0.8, 0.1, 0.1)


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list


def split_indices(labels, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified 80/10/10 index split. Same labels and seed give the same split."""
    y = np.asarray(labels).astype(int)
    classes = [np.flatnonzero(y == c) for c in (0, 1)]
    for c, idx in zip(("interictal", "preictal"), classes):
        if idx.size < 10:
            raise InsufficientDataError(f"need at least 10 {c} windows, got {idx.size}")
    n = y.size
    want_train = round(SPLIT_FRACTIONS[0] * n)
    want_val = round(SPLIT_FRACTIONS[1] * n)

    counts = []
    for idx in classes:
        m = idx.size
        counts.append([round(SPLIT_FRACTIONS[0] * m), round(SPLIT_FRACTIONS[1] * m)])
    # Rebalance by single windows against test so totals hit the exact fractions.
    for j, want in ((0, want_train), (1, want_val)):
        diff = want - sum(c[j] for c in counts)
        step = 1 if diff > 0 else -1
        order = np.argsort([-classes[i].size for i in range(2)])
        k = 0
        while diff != 0:
            c = counts[order[k % 2]]
            m = classes[order[k % 2]].size
            if 0 <= c[j] + step and c[0] + c[1] + step <= m:
                c[j] += step
                diff -= step
            k += 1

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5B17]))
    parts = ([], [], [])
    for idx, (n_tr, n_va) in zip(classes, counts):
        perm = rng.permutation(idx)
        parts[0].append(perm[:n_tr])
        parts[1].append(perm[n_tr:n_tr + n_va])
        parts[2].append(perm[n_tr + n_va:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def split_dataset(windows, seed: int) -> DatasetSplit:
    labels = [int(w.label) for w in windows]
    tr, va, te = split_indices(labels, seed)
    return DatasetSplit([windows[i] for i in tr], [windows[i] for i in va], [windows[i] for i in te])


def expected_ratio(duration_s, onsets, horizon_s=DEFAULT_HORIZON_S, exclusion_s=DEFAULT_EXCLUSION_S) -> float:
    """Preictal / interictal window-count ratio for a given onset layout."""
    _, labels = window_labels(duration_s, onsets, horizon_s, exclusion_s)
    inter = np.count_nonzero(labels == 0)
    return np.count_nonzero(labels == 1) / inter if inter else math.inf
