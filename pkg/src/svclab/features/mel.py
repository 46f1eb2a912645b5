"""Framing, STFT and log-mel analysis shared by feature extraction and the vocoder."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import AudioClip, AudioError

LOG_FLOOR = 1e-5


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 24000
    n_mels: int = 80
    hop: int = 300
    win: int = 1200
    fmin: float = 0.0
    fmax: float | None = None

    def __post_init__(self):
        if self.win < self.hop:
            raise ValueError(f"win ({self.win}) must be >= hop ({self.hop})")
        if self.n_mels <= 0 or self.hop <= 0:
            raise ValueError("n_mels and hop must be positive")

    @property
    def n_freqs(self) -> int:
        return self.win // 2 + 1


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # T x n_mels, float32
    hop_samples: int = 300
    win_samples: int = 1200

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2:
            raise ValueError(f"mel frames must be 2-D, got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("mel frames must be finite")
        object.__setattr__(self, "frames", frames)

    @property
    def n_mels(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float = 0.0,
                   fmax: float | None = None) -> np.ndarray:
    """Triangular HTK-scale filters, shape (n_mels, n_fft // 2 + 1), area-normalized."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights *= (2.0 / (upper - lower))
    weights.setflags(write=False)
    return weights


@lru_cache(maxsize=16)
def mel_pseudo_inverse(sample_rate: int, n_fft: int, n_mels: int, fmin: float = 0.0,
                       fmax: float | None = None) -> np.ndarray:
    inv = np.linalg.pinv(mel_filterbank(sample_rate, n_fft, n_mels, fmin, fmax))
    inv.setflags(write=False)
    return inv


@lru_cache(maxsize=8)
def hann(win: int) -> np.ndarray:
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)
    w.setflags(write=False)
    return w


def n_frames(n_samples: int, hop: int) -> int:
    return math.ceil(n_samples / hop)


def frame_signal(samples: np.ndarray, hop: int, win: int) -> np.ndarray:
    """Centered frames; frame t covers samples around t * hop.

    Zero padding of ``win // 2`` on the left and enough on the right that
    ``ceil(len / hop)`` full windows fit. Clips shorter than half a window
    are rejected.
    """
    n = samples.size
    count = n_frames(n, hop)
    left = win // 2
    right = (count - 1) * hop + win - n - left
    if n < left:
        raise AudioError(f"clip of {n} samples is too short for window {win}")
    padded = np.pad(samples, (left, max(right, 0)), mode="constant")
    idx = np.arange(win)[None, :] + hop * np.arange(count)[:, None]
    return padded[idx]


def stft(samples: np.ndarray, hop: int, win: int) -> np.ndarray:
    """Complex spectrum, shape (T, win // 2 + 1)."""
    return np.fft.rfft(frame_signal(samples, hop, win) * hann(win), axis=1)


def istft(spectrum: np.ndarray, hop: int, win: int, length: int) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`."""
    frames = np.fft.irfft(spectrum, n=win, axis=1) * hann(win)
    count = frames.shape[0]
    total = (count - 1) * hop + win
    out = np.zeros(total)
    norm = np.zeros(total)
    wsq = hann(win) ** 2
    for t in range(count):
        out[t * hop:t * hop + win] += frames[t]
        norm[t * hop:t * hop + win] += wsq
    out /= np.maximum(norm, 1e-8)
    left = win // 2
    return out[left:left + length]


def compute_mel(clip: AudioClip, cfg: MelConfig = MelConfig()) -> MelSpectrogram:
    """Log-magnitude mel spectrogram with a ``LOG_FLOOR`` clamp."""
    if len(clip) == 0:
        raise AudioError("cannot analyse an empty clip")
    samples = clip.samples
    if clip.sample_rate != cfg.sample_rate:
        raise AudioError(f"clip rate {clip.sample_rate} != config rate {cfg.sample_rate}")
    magnitude = np.abs(stft(samples, cfg.hop, cfg.win))
    fb = mel_filterbank(cfg.sample_rate, cfg.win, cfg.n_mels, cfg.fmin, cfg.fmax)
    mel = magnitude @ fb.T
    return MelSpectrogram(np.log(np.maximum(mel, LOG_FLOOR)), cfg.hop, cfg.win)


def mel_band_of(freq_hz: float, cfg: MelConfig = MelConfig()) -> int:
    """Index of the filter whose peak lies closest to ``freq_hz``."""
    fmax = cfg.sample_rate / 2.0 if cfg.fmax is None else cfg.fmax
    centers = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(fmax), cfg.n_mels + 2))[1:-1]
    return int(np.argmin(np.abs(centers - freq_hz)))
