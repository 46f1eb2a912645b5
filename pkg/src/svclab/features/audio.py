"""Waveform container, WAV I/O and calibrated noise injection."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

DEFAULT_SAMPLE_RATE = 24000
NORMALIZED_PEAK = 0.95
# int16 full scale is 32767/32768; anything at or above it is treated as clipped
FULL_SCALE = 1.0 - 2.0 ** -15


class AudioError(ValueError):
    """Raised for unreadable, unsupported or degenerate audio."""


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"expected mono samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise AudioError("audio contains non-finite samples")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise AudioError("audio exceeds full scale; normalize before constructing")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def power(self) -> float:
        return float(np.mean(self.samples ** 2)) if self.samples.size else 0.0


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise AudioError(f"unsupported sample encoding {data.dtype}")


def resample(samples: np.ndarray, orig_sr: int, target_sr: int) -> np.ndarray:
    if orig_sr == target_sr:
        return samples
    ratio = Fraction(target_sr, orig_sr).limit_denominator(1000)
    return resample_poly(samples, ratio.numerator, ratio.denominator)


def peak_normalize(samples: np.ndarray) -> np.ndarray:
    """Scale to a 0.95 peak when the signal reaches full scale."""
    peak = float(np.max(np.abs(samples))) if samples.size else 0.0
    if peak >= FULL_SCALE:
        return samples * (NORMALIZED_PEAK / peak)
    return samples


def load_audio(path: str | os.PathLike, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """Read a PCM WAV, downmix to mono, resample and peak-check it."""
    try:
        sr, data = wavfile.read(os.fspath(path))
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises ValueError / struct.error on corrupt headers
        raise AudioError(f"cannot read {path}: {exc}") from exc
    samples = _to_float(np.asarray(data))
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise AudioError(f"{path} contains no samples")
    if not np.all(np.isfinite(samples)):
        raise AudioError(f"{path} contains non-finite samples")
    samples = resample(samples, sr, sample_rate)
    samples = peak_normalize(samples)
    return AudioClip(samples, sample_rate)


def save_audio(path: str | os.PathLike, clip: AudioClip) -> None:
    """Write 16-bit PCM."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(os.fspath(path), clip.sample_rate, pcm)


def add_white_noise(clip: AudioClip, target_snr_db: float, seed: int) -> AudioClip:
    """Add gaussian noise so that the realized SNR equals ``target_snr_db``.

    The noise draw is rescaled to the exact power the target demands, so the
    SNR measured against the clean clip matches to floating-point precision
    (unless the sum has to be clipped back into [-1, 1]).
    """
    if math.isinf(target_snr_db) and target_snr_db > 0:
        return clip
    signal_power = float(np.sum(clip.samples ** 2))
    if signal_power == 0.0:
        raise AudioError("cannot set an SNR on a silent clip")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clip.samples.size)
    noise_power = signal_power / 10.0 ** (target_snr_db / 10.0)
    noise *= math.sqrt(noise_power / float(np.sum(noise ** 2)))
    return AudioClip(np.clip(clip.samples + noise, -1.0, 1.0), clip.sample_rate)
