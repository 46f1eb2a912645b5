"""Objective metrics: pitch-contour NCC and signal-to-noise ratios."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..features import AudioClip, F0Contour

SNR_CEILING_DB = 60.0
SNR_FRAME_SECONDS = 0.025


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class NccReport:
    ncc: float
    voiced_frames_used: int
    coverage: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SnrReport:
    snr_db: float
    method: str  # "reference" | "frame_energy_estimate"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["infinite"] = math.isinf(self.snr_db)
        if d["infinite"]:
            d["snr_db"] = "inf" if self.snr_db > 0 else "-inf"
        return d


def ncc(ref: F0Contour, hyp: F0Contour, mean_removal: bool = True) -> NccReport:
    """Zero-lag normalized cross-correlation of linear-Hz F0 over co-voiced frames."""
    n = min(len(ref), len(hyp))
    if n == 0:
        raise MetricError("empty contour")
    if abs(len(ref) - len(hyp)) > 0.05 * max(len(ref), len(hyp)):
        warnings.warn(f"contour lengths differ by more than 5% ({len(ref)} vs {len(hyp)}); truncating")
    both = (ref.voicing[:n] > 0) & (hyp.voicing[:n] > 0)
    used = int(both.sum())
    if used < 2:
        raise MetricError(f"only {used} co-voiced frames; need at least 2")
    x = ref.hz[:n][both]
    y = hyp.hz[:n][both]
    if mean_removal:
        x = x - x.mean()
        y = y - y.mean()
    denom = math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y)))
    if denom == 0.0:
        raise MetricError("zero variance in a contour")
    value = float(np.dot(x, y)) / denom
    return NccReport(ncc=min(1.0, max(-1.0, value)), voiced_frames_used=used, coverage=used / n)


def snr_with_reference(clean: AudioClip, degraded: AudioClip) -> SnrReport:
    if len(clean) != len(degraded):
        raise MetricError(f"length mismatch: {len(clean)} vs {len(degraded)}")
    signal = float(np.sum(clean.samples ** 2))
    if signal == 0.0:
        raise MetricError("clean reference is silent")
    noise = float(np.sum((degraded.samples - clean.samples) ** 2))
    if noise == 0.0:
        return SnrReport(math.inf, "reference")
    return SnrReport(10.0 * math.log10(signal / noise), "reference")


def frame_powers(clip: AudioClip, frame_seconds: float = SNR_FRAME_SECONDS) -> np.ndarray:
    size = max(1, int(round(frame_seconds * clip.sample_rate)))
    count = len(clip) // size
    frames = clip.samples[:count * size].reshape(count, size)
    return np.mean(frames ** 2, axis=1)


def snr_estimate(signal: AudioClip, noise_fraction: float = 0.1, signal_fraction: float = 0.5) -> SnrReport:
    """Reference-free SNR: loudest-half frame power over quietest-decile frame power.

    Clamped to ``SNR_CEILING_DB``.
    """
    if signal.duration < 1.0 - 1e-9:
        raise MetricError(f"need at least 1 s of audio, got {signal.duration:.3f} s")
    powers = np.sort(frame_powers(signal))
    if powers[-1] == 0.0:
        raise MetricError("signal is silent")
    n_noise = max(1, int(round(noise_fraction * powers.size)))
    n_signal = max(1, int(round(signal_fraction * powers.size)))
    noise = float(powers[:n_noise].mean())
    loud = float(powers[-n_signal:].mean())
    if noise <= loud * 10.0 ** (-SNR_CEILING_DB / 10.0):
        return SnrReport(SNR_CEILING_DB, "frame_energy_estimate")
    return SnrReport(min(SNR_CEILING_DB, 10.0 * math.log10(loud / noise)), "frame_energy_estimate")
