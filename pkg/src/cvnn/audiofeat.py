"""STFT, mel filterbank, MFCC, and the phase-preserving complex workflows.

The production transform path runs on the in-package radix-2 FFT and a
matrix DCT-II; naive summation oracles live in the test suite.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass, field

import numpy as np

from .fft import dct2_matrix, is_power_of_two, rfft_radix2
from .tensor import ComplexTensor


def hann_window(n_f: int) -> np.ndarray:
    """Symmetric Hann window 0.5*(1 - cos(2 pi i/(n_f - 1))); endpoints zero."""
    if n_f < 2:
        raise ValueError(f"window length must be >= 2, got {n_f}")
    i = np.arange(n_f)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * i / (n_f - 1)))


def hann_periodic(n_f: int) -> np.ndarray:
    """DFT-even Hann (denominator n_f). Its spectrum occupies exactly three
    bins, which makes bin-centered test tones fully phase-transparent."""
    if n_f < 2:
        raise ValueError(f"window length must be >= 2, got {n_f}")
    i = np.arange(n_f)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * i / n_f))


@dataclass
class StftConfig:
    n_fft: int = 2048
    hop: int = 512
    window: np.ndarray = None

    def __post_init__(self):
        if not 0 < self.hop <= self.n_fft:
            raise ValueError(f"hop must satisfy 0 < hop <= n_fft, got {self.hop}")
        if self.window is None:
            self.window = hann_window(self.n_fft)
        self.window = np.asarray(self.window, dtype=np.float64)
        if self.window.shape != (self.n_fft,):
            raise ValueError("window length must equal n_fft")
        if self.window.min() < 0 or self.window.max() > 1:
            raise ValueError("window values must lie in [0, 1]")


@dataclass
class ComplexSpectrogram:
    data: ComplexTensor          # (n_bins, n_frames)
    sample_rate: float

    @property
    def n_bins(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]


@dataclass
class MelFilterbank:
    weights: np.ndarray          # (n_mels, n_bins), triangular rows
    centers: np.ndarray          # bin indices f(0..n_mels+1) incl. edges


@dataclass
class MfccConfig:
    sample_rate: float = 22050.0
    stft: StftConfig = field(default_factory=StftConfig)
    n_mels: int = 26
    n_mfcc: int = 13
    fmin: float = 0.0
    fmax: float = None
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.fmax is None:
            self.fmax = self.sample_rate / 2.0
        if not 0 <= self.fmin < self.fmax <= self.sample_rate / 2.0:
            raise ValueError(
                f"need 0 <= fmin < fmax <= sr/2, got fmin={self.fmin} fmax={self.fmax}"
            )
        if self.n_mfcc > self.n_mels:
            raise ValueError("n_mfcc cannot exceed n_mels")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


def num_frames(n_samples: int, cfg: StftConfig) -> int:
    return (n_samples - cfg.n_fft) // cfg.hop + 1


def stft(x: np.ndarray, cfg: StftConfig, sample_rate: float) -> ComplexSpectrogram:
    """Windowed DFT over frames starting at multiples of hop; keeps bins 0..N/2."""
    x = np.asarray(x, dtype=np.float64)
    n = cfg.n_fft
    if x.ndim != 1 or len(x) < n:
        raise ValueError(f"signal must be 1-D with at least {n} samples")
    if not is_power_of_two(n):
        raise ValueError(f"n_fft must be a power of two, got {n}")
    t = num_frames(len(x), cfg)
    frames = np.empty((t, n), dtype=np.float64)
    for j in range(t):
        frames[j] = x[j * cfg.hop: j * cfg.hop + n]
    frames *= cfg.window
    spec = rfft_radix2(frames).T        # (n_bins, n_frames)
    return ComplexSpectrogram(ComplexTensor(spec.real, spec.imag), sample_rate)


def mel_scale(f) -> np.ndarray:
    """Hz -> mel: 2595 log10(1 + f/700)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be nonnegative")
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def mel_filterbank(cfg: MfccConfig) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the mel scale.

    Center bins are f(m) = floor((N+1) * f_hz / sample_rate). Repeated bins
    would degenerate a triangle, so collisions raise with the filter index.
    """
    n = cfg.stft.n_fft
    n_bins = n // 2 + 1
    pts = np.linspace(mel_scale(cfg.fmin), mel_scale(cfg.fmax), cfg.n_mels + 2)
    bins = np.floor((n + 1) * mel_to_hz(pts) / cfg.sample_rate).astype(np.int64)
    bins = np.minimum(bins, n_bins - 1)
    for m in range(1, cfg.n_mels + 2):
        if bins[m] <= bins[m - 1]:
            raise ValueError(
                f"degenerate mel filterbank: filters {m - 1} and {m} share bin "
                f"{bins[m]}; use fewer mels or a longer FFT"
            )
    weights = np.zeros((cfg.n_mels, n_bins))
    for m in range(1, cfg.n_mels + 1):
        left, center, right = bins[m - 1], bins[m], bins[m + 1]
        i = np.arange(left, center)
        weights[m - 1, i] = (i - left) / (center - left)
        weights[m - 1, center] = 1.0
        i = np.arange(center + 1, right + 1)
        weights[m - 1, i] = (right - i) / (right - center)
    return MelFilterbank(weights, bins)


def power_spectrum(spec: ComplexSpectrogram) -> np.ndarray:
    d = spec.data
    return d.real ** 2 + d.imag ** 2


def log_mel_energies(x: np.ndarray, cfg: MfccConfig):
    """Shared magnitude path: |stft|^2 -> mel energies -> ln(E + floor)."""
    spec = stft(x, cfg.stft, cfg.sample_rate)
    fb = mel_filterbank(cfg)
    energies = fb.weights @ power_spectrum(spec)
    return np.log(energies + cfg.log_floor), spec, fb


def mfcc(x: np.ndarray, cfg: MfccConfig) -> np.ndarray:
    """Standard MFCC matrix of shape (n_mfcc, n_frames)."""
    logmel, _, _ = log_mel_energies(x, cfg)
    dct = dct2_matrix(cfg.n_mels)
    return (dct @ logmel)[: cfg.n_mfcc]


def mel_phase_matrix(x: np.ndarray, cfg: MfccConfig) -> np.ndarray:
    """Per-filter phase: the magnitude-weighted circular mean of bin phases,
    phi_m(tau) = angle(sum_i H_m(i) h(i, tau)). Zero aggregate -> phase 0."""
    spec = stft(x, cfg.stft, cfg.sample_rate)
    fb = mel_filterbank(cfg)
    zr = fb.weights @ spec.data.real
    zi = fb.weights @ spec.data.imag
    return np.arctan2(zi + 0.0, zr)


def complex_mfcc_workflow1(x: np.ndarray, cfg: MfccConfig) -> ComplexTensor:
    """Workflow 1: keep the raw complex STFT (no mel, no log, no DCT)."""
    return stft(x, cfg.stft, cfg.sample_rate).data


def complex_mfcc_workflow2(x: np.ndarray, cfg: MfccConfig) -> ComplexTensor:
    """Workflow 2: reattach per-filter phase after the log-mel stage.

    The complex log-mel L_m exp(i phi_m) is DCT-transformed per plane and
    truncated to n_mfcc rows.
    """
    logmel, spec, fb = log_mel_energies(x, cfg)
    zr = fb.weights @ spec.data.real
    zi = fb.weights @ spec.data.imag
    phi = np.arctan2(zi + 0.0, zr)
    real = logmel * np.cos(phi)
    imag = logmel * np.sin(phi)
    dct = dct2_matrix(cfg.n_mels)
    return ComplexTensor((dct @ real)[: cfg.n_mfcc], (dct @ imag)[: cfg.n_mfcc])


def fit_frames(mat, n_frames: int):
    """Trim or zero-pad the frame axis (last) to exactly n_frames columns."""
    if isinstance(mat, ComplexTensor):
        return ComplexTensor(fit_frames(mat.real, n_frames),
                             fit_frames(mat.imag, n_frames))
    t = mat.shape[-1]
    if t >= n_frames:
        return mat[..., :n_frames]
    pad = [(0, 0)] * (mat.ndim - 1) + [(0, n_frames - t)]
    return np.pad(mat, pad)


# ---------------------------------------------------------------------------
# WAV I/O (RIFF/WAVE, 16-bit signed PCM, mono)

def read_wav(path):
    """Returns (samples in [-1, 1), sample_rate). Rejects stereo and
    non-16-bit-PCM content."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise ValueError(f"{path}: compressed WAV unsupported (PCM required)")
            if wf.getnchannels() != 1:
                raise ValueError(f"{path}: stereo WAV unsupported (mono required)")
            if wf.getsampwidth() != 2:
                raise ValueError(
                    f"{path}: {8 * wf.getsampwidth()}-bit WAV unsupported "
                    "(16-bit PCM required)"
                )
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise ValueError(f"{path}: invalid WAV ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    samples = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(samples * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.tobytes())


def export_features_csv(path, mat: np.ndarray, prefix: str = "c") -> None:
    """Frame-major CSV: one row per frame, header names the coefficients."""
    mat = np.asarray(mat)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{prefix}{i}" for i in range(mat.shape[0])])
        for j in range(mat.shape[1]):
            writer.writerow([repr(v) for v in mat[:, j]])
