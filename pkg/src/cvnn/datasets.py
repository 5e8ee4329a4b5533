"""Dataset ingestion and the synthetic corpora used for dataset-free runs.

Covers IDX image parsing, the five complex-input perturbation settings,
directory-per-class WAV loading, and deterministic synthetic audio/image
generators.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import audiofeat
from .tensor import ComplexTensor, Rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataError(Exception):
    """Raised when input data is missing or malformed."""


@dataclass
class LabeledImages:
    images: np.ndarray          # (N, 1, H, W) float64 in [0, 1]
    labels: np.ndarray          # (N,) int64


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    label: int
    source_id: str


PERTURBATION_SETTINGS = (
    "real_cnn_baseline", "cv_real_input", "fixed_imag", "fixed_phase",
    "random_perturb",
)


@dataclass
class PerturbationSetting:
    setting: str
    imag_value: float = 0.1
    phase_value: float = 0.5        # radians
    noise_scale: float = 1e-5
    train_only: bool = True

    def __post_init__(self):
        if self.setting not in PERTURBATION_SETTINGS:
            raise ValueError(
                f"unknown setting '{self.setting}' "
                f"(expected one of {PERTURBATION_SETTINGS})"
            )


# ---------------------------------------------------------------------------
# IDX image container

def _read_u32be(fh, what):
    raw = fh.read(4)
    if len(raw) != 4:
        raise DataError(f"truncated {what} file")
    return struct.unpack(">I", raw)[0]


def load_idx(images_path, labels_path) -> LabeledImages:
    """Parse big-endian IDX image/label pairs and scale pixels to [0, 1]."""
    with open(images_path, "rb") as fh:
        magic = _read_u32be(fh, "images")
        if magic != IDX_IMAGES_MAGIC:
            raise DataError(f"bad images magic 0x{magic:08x}")
        count = _read_u32be(fh, "images")
        rows = _read_u32be(fh, "images")
        cols = _read_u32be(fh, "images")
        raw = fh.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise DataError("truncated images file")
        images = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
        images = images.reshape(count, 1, rows, cols)
    with open(labels_path, "rb") as fh:
        magic = _read_u32be(fh, "labels")
        if magic != IDX_LABELS_MAGIC:
            raise DataError(f"bad labels magic 0x{magic:08x}")
        n_labels = _read_u32be(fh, "labels")
        raw = fh.read(n_labels)
        if len(raw) != n_labels:
            raise DataError("truncated labels file")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if count != n_labels:
        raise DataError(f"image/label count mismatch: {count} vs {n_labels}")
    return LabeledImages(images, labels)


def write_idx(images: np.ndarray, labels: np.ndarray,
              images_path, labels_path) -> None:
    """Inverse of load_idx for fixtures; expects pixels in [0, 1]."""
    n, _, rows, cols = images.shape
    pixels = np.round(np.clip(images, 0, 1) * 255.0).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


# ---------------------------------------------------------------------------
# Experiment-1 input settings

def apply_perturbation(imgs: LabeledImages, s: PerturbationSetting,
                       split: str, rng: Rng) -> ComplexTensor:
    """Complex input tensor for one CVCNN setting.

    Settings fixed_imag / fixed_phase / random_perturb transform the train
    split only; the test split always carries the original pixels with a
    zero imaginary plane.
    """
    if s.setting == "real_cnn_baseline":
        raise ValueError("real baseline bypasses the complex input path")
    if split not in ("train", "test"):
        raise ValueError(f"split must be train|test, got '{split}'")
    x = imgs.images
    transform = split == "train" or not s.train_only
    if s.setting == "cv_real_input" or not transform:
        return ComplexTensor(x.copy(), np.zeros_like(x))
    if s.setting == "fixed_imag":
        return ComplexTensor(x.copy(), np.full_like(x, s.imag_value))
    if s.setting == "fixed_phase":
        return ComplexTensor(x * np.cos(s.phase_value),
                             x * np.sin(s.phase_value))
    if s.setting == "random_perturb":
        eps = s.noise_scale
        return ComplexTensor(x + rng.uniform(x.shape, -eps, eps),
                             rng.uniform(x.shape, -eps, eps))
    raise ValueError(f"unhandled setting '{s.setting}'")


# ---------------------------------------------------------------------------
# WAV corpora

def load_wav_dir(root, class_map: dict | None = None):
    """Load a directory-per-class WAV tree.

    Returns (clips, errors): per-file failures are collected as
    (path, message) pairs and the run continues. A class directory that
    yields no clips at all raises DataError naming it.
    """
    root = str(root)
    if not os.path.isdir(root):
        raise DataError(f"dataset root '{root}' is not a directory")
    class_names = sorted(
        d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d))
    )
    if not class_names:
        raise DataError(f"dataset root '{root}' has no class subdirectories")
    if class_map is None:
        class_map = {name: i for i, name in enumerate(class_names)}
    clips = []
    errors = []
    for name in class_names:
        if name not in class_map:
            continue
        label = class_map[name]
        cdir = os.path.join(root, name)
        loaded = 0
        for fname in sorted(os.listdir(cdir)):
            if not fname.lower().endswith(".wav"):
                continue
            path = os.path.join(cdir, fname)
            try:
                samples, rate = audiofeat.read_wav(path)
            except ValueError as exc:
                errors.append((path, str(exc)))
                continue
            clips.append(AudioClip(samples, rate, label, f"{name}/{fname}"))
            loaded += 1
        if loaded == 0:
            raise DataError(f"class '{name}' contains no readable wav files")
    return clips, errors


def segment_clip(samples: np.ndarray, sample_rate: int, seconds: float = 3.0):
    """Non-overlapping fixed-length segments (a 30 s track yields ten 3 s clips)."""
    seg = int(round(seconds * sample_rate))
    n = len(samples) // seg
    return [samples[i * seg:(i + 1) * seg] for i in range(max(n, 0))]


def write_manifest_csv(path, entries) -> None:
    """entries: iterable of (path, label, split)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label", "split"])
        for row in entries:
            writer.writerow(list(row))


# ---------------------------------------------------------------------------
# Synthetic audio

@dataclass
class SynthAudioSpec:
    kind: str = "tonal_percussive"      # tonal_percussive | phase_coded
    n_per_class: int = 100
    duration: float = 3.0
    sample_rate: int = 22050


def _tonal_clip(rng: Rng, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    f0 = rng.uniform((1,), 200.0, 600.0)[0]
    n_h = 3 + int(rng.uniform((1,))[0] * 3)        # 3..5 harmonics
    sig = np.sin(2 * np.pi * f0 * t + rng.uniform((1,), -np.pi, np.pi)[0])
    for k in range(2, n_h + 1):
        amp = rng.uniform((1,), 0.15, 0.5)[0] / k
        sig += amp * np.sin(2 * np.pi * k * f0 * t
                            + rng.uniform((1,), -np.pi, np.pi)[0])
    sig += 0.01 * rng.normal((n,))
    return 0.8 * sig / np.abs(sig).max()


def _percussive_clip(rng: Rng, n: int, sr: int) -> np.ndarray:
    sig = np.zeros(n)
    n_bursts = 8 + int(rng.uniform((1,))[0] * 9)   # 8..16 bursts
    for _ in range(n_bursts):
        start = int(rng.uniform((1,))[0] * (n - sr // 5))
        length = int(sr * rng.uniform((1,), 0.05, 0.2)[0])
        env = np.exp(-np.arange(length) / (length * rng.uniform((1,), 0.1, 0.4)[0]))
        sig[start:start + length] += env * rng.normal((length,))
    sig += 0.005 * rng.normal((n,))
    return 0.8 * sig / np.abs(sig).max()


def phase_coded_tone_bins(cfg: audiofeat.MfccConfig | None = None,
                          n_tones: int = 13) -> np.ndarray:
    """Bin indices for the phase-coded generator's tones.

    Tones sit near the centers of the first n_tones mel filters, snapped to
    multiples of 4 so that (with hop = n_fft/4) the per-frame STFT phase of
    each tone is constant, and spaced >= 4 bins so three-bin-support windows
    keep each tone's magnitude independent of every phase offset.
    """
    if cfg is None:
        cfg = audiofeat.MfccConfig()
    fb = audiofeat.mel_filterbank(cfg)
    centers = fb.centers[1:n_tones + 1]
    bins = []
    prev = 0
    for c in centers:
        b = max(4, int(round(c / 4.0)) * 4)
        if b <= prev:
            b = prev + 4
        bins.append(b)
        prev = b
    return np.asarray(bins, dtype=np.int64)


def _phase_coded_pair(rng: Rng, n: int, sr: int, bins: np.ndarray, n_fft: int):
    """Two clips with identical per-tone amplitudes; class B shifts the
    phase of every odd-indexed tone by pi."""
    t = np.arange(n)
    amp = (1.0 / (1.0 + 0.15 * np.arange(len(bins)))) \
        * np.exp(rng.uniform((len(bins),), -0.3, 0.3))
    psi_a = rng.uniform((1,), -np.pi, np.pi)[0]
    psi_b = rng.uniform((1,), -np.pi, np.pi)[0]
    offsets = np.where(np.arange(len(bins)) % 2 == 1, np.pi, 0.0)
    clip_a = np.zeros(n)
    clip_b = np.zeros(n)
    for a, b, off in zip(amp, bins, offsets):
        arg = 2 * np.pi * b * t / n_fft
        clip_a += a * np.sin(arg + psi_a)
        clip_b += a * np.sin(arg + psi_b + off)
    peak = max(np.abs(clip_a).max(), np.abs(clip_b).max())
    return 0.8 * clip_a / peak, 0.8 * clip_b / peak


def synth_audio_dataset(spec: SynthAudioSpec, rng: Rng):
    """Deterministic two-class synthetic audio.

    tonal_percussive: harmonic stacks (class 0) vs noise bursts (class 1).
    phase_coded: class pairs with identical magnitude spectra whose
    per-band phase offsets differ by class.
    """
    if spec.duration <= 0:
        raise ValueError("clip duration must be positive")
    n = int(round(spec.duration * spec.sample_rate))
    clips = []
    if spec.kind == "tonal_percussive":
        for i in range(spec.n_per_class):
            clips.append(AudioClip(_tonal_clip(rng.split(2 * i), n, spec.sample_rate),
                                   spec.sample_rate, 0, f"tonal/{i:04d}"))
            clips.append(AudioClip(_percussive_clip(rng.split(2 * i + 1), n, spec.sample_rate),
                                   spec.sample_rate, 1, f"percussive/{i:04d}"))
    elif spec.kind == "phase_coded":
        cfg = audiofeat.MfccConfig(sample_rate=spec.sample_rate)
        bins = phase_coded_tone_bins(cfg)
        for i in range(spec.n_per_class):
            a, b = _phase_coded_pair(rng.split(i), n, spec.sample_rate,
                                     bins, cfg.stft.n_fft)
            clips.append(AudioClip(a, spec.sample_rate, 0, f"phase_a/{i:04d}"))
            clips.append(AudioClip(b, spec.sample_rate, 1, f"phase_b/{i:04d}"))
    else:
        raise ValueError(f"unknown synthetic audio kind '{spec.kind}'")
    return clips


# ---------------------------------------------------------------------------
# Synthetic images (desk-scale stand-in when no IDX corpus is available)

def _glyph_masks(size: int):
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    dy = yy - c
    dx = xx - c
    r = np.hypot(dx, dy)
    box = np.maximum(np.abs(dx), np.abs(dy))
    return [
        (np.abs(r - 7.5) < 1.5),                                   # ring
        (np.abs(dx) < 2) & (np.abs(dy) < 9),                       # vertical bar
        (np.abs(dy) < 2) & (np.abs(dx) < 9),                       # horizontal bar
        (np.abs(dx - dy) < 2.2) & (r < 10),                        # diagonal
        (np.abs(dx + dy) < 2.2) & (r < 10),                        # anti-diagonal
        ((np.abs(dx) < 1.8) | (np.abs(dy) < 1.8)) & (r < 9),       # plus
        ((np.abs(dx - dy) < 2) | (np.abs(dx + dy) < 2)) & (r < 9), # X
        (box > 5.5) & (box < 8.0),                                 # square outline
        (r < 5),                                                   # disk
        (np.hypot(dx - 5, dy) < 2.8) | (np.hypot(dx + 5, dy) < 2.8),  # two dots
    ]


def synth_image_dataset(n_per_class: int, rng: Rng,
                        size: int = 28) -> LabeledImages:
    """Ten glyph classes with random shift, intensity, and noise."""
    masks = _glyph_masks(size)
    n_total = 10 * n_per_class
    images = np.zeros((n_total, 1, size, size))
    labels = np.zeros(n_total, dtype=np.int64)
    idx = 0
    for cls, mask in enumerate(masks):
        base = mask.astype(np.float64)
        for i in range(n_per_class):
            r = rng.split(cls * n_per_class + i)
            dx = int(r.uniform((1,))[0] * 7) - 3
            dy = int(r.uniform((1,))[0] * 7) - 3
            img = np.roll(np.roll(base, dy, axis=0), dx, axis=1)
            img = img * r.uniform((1,), 0.7, 1.0)[0]
            img = img + r.uniform((size, size), 0.0, 0.15)
            images[idx, 0] = np.clip(img, 0.0, 1.0)
            labels[idx] = cls
            idx += 1
    return LabeledImages(images, labels)
