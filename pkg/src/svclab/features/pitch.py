"""Frame-synchronous F0 tracking by normalized autocorrelation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .mel import frame_signal


@dataclass(frozen=True)
class F0Config:
    sample_rate: int = 24000
    hop: int = 300
    win: int = 1200
    f0_min: float = 65.0
    f0_max: float = 1000.0
    voicing_threshold: float = 0.3
    # lowest lag whose correlation reaches this fraction of the best one wins;
    # suppresses sub-harmonic (octave-down) picks on strongly periodic frames
    octave_ratio: float = 0.9
    silence_rms: float = 1e-4


@dataclass(frozen=True)
class F0Contour:
    log_f0: np.ndarray
    voicing: np.ndarray

    def __post_init__(self):
        log_f0 = np.asarray(self.log_f0, dtype=np.float32)
        voicing = np.asarray(self.voicing, dtype=np.float32)
        if log_f0.shape != voicing.shape or log_f0.ndim != 1:
            raise ValueError("log_f0 and voicing must be equal-length vectors")
        if not np.all(np.isin(voicing, (0.0, 1.0))):
            raise ValueError("voicing must be binary")
        if np.any((voicing == 0) != (log_f0 == 0)):
            raise ValueError("log_f0 must be zero exactly at unvoiced frames")
        object.__setattr__(self, "log_f0", log_f0)
        object.__setattr__(self, "voicing", voicing)

    def __len__(self):
        return self.log_f0.size

    @property
    def hz(self) -> np.ndarray:
        """Linear F0, zero at unvoiced frames."""
        return np.where(self.voicing > 0, np.exp(self.log_f0.astype(np.float64)), 0.0)

    @classmethod
    def from_hz(cls, hz) -> "F0Contour":
        hz = np.asarray(hz, dtype=np.float64)
        voiced = hz > 0
        log_f0 = np.zeros(hz.shape, dtype=np.float32)
        log_f0[voiced] = np.log(hz[voiced])
        # a voiced 1 Hz frame would encode as log 0 == 0; disallow
        voiced &= log_f0 != 0
        return cls(log_f0, voiced.astype(np.float32))

    def truncate(self, length: int) -> "F0Contour":
        return F0Contour(self.log_f0[:length], self.voicing[:length])


def frame_nccf(frames: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation of ``x[:W-k]`` with ``x[k:]`` for k in [0, max_lag].

    Numerators come from one FFT autocorrelation per frame; the energy terms
    of both segments come from cumulative sums.
    """
    n, width = frames.shape
    size = 1 << int(np.ceil(np.log2(2 * width)))
    spec = np.fft.rfft(frames, n=size, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), n=size, axis=1)[:, :max_lag + 1]
    csum = np.concatenate([np.zeros((n, 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    head = csum[:, width - lags]                 # energy of x[0:W-k]
    tail = csum[:, [width]] - csum[:, lags]      # energy of x[k:W]
    denom = np.sqrt(np.maximum(head * tail, 0.0))
    return np.where(denom > 0, acf / np.where(denom > 0, denom, 1.0), 0.0)


def _parabolic(values: np.ndarray, idx: int) -> tuple[float, float]:
    if idx <= 0 or idx >= values.size - 1:
        return float(idx), float(values[idx])
    a, b, c = values[idx - 1], values[idx], values[idx + 1]
    denom = a - 2.0 * b + c
    if denom >= 0:
        return float(idx), float(b)
    shift = 0.5 * (a - c) / denom
    return idx + shift, float(b - 0.25 * (a - c) * shift)


def _pick_lag(row: np.ndarray, lo: int, hi: int, cfg: F0Config) -> tuple[float, float]:
    segment = row[lo:hi + 1]
    interior = (segment[1:-1] >= segment[:-2]) & (segment[1:-1] > segment[2:])
    peaks = np.flatnonzero(interior) + 1
    if peaks.size == 0:
        return 0.0, 0.0
    best = float(segment[peaks].max())
    chosen = peaks[segment[peaks] >= cfg.octave_ratio * best][0]
    lag, value = _parabolic(row, lo + int(chosen))
    return lag, value


def extract_f0(clip: AudioClip, cfg: F0Config = F0Config()) -> F0Contour:
    """One (log F0, voicing) pair per analysis frame, aligned with the mel frames."""
    frames = frame_signal(clip.samples, cfg.hop, cfg.win)
    frames = frames - frames.mean(axis=1, keepdims=True)
    lo = max(1, int(np.floor(cfg.sample_rate / cfg.f0_max)))
    hi = min(cfg.win - 2, int(np.ceil(cfg.sample_rate / cfg.f0_min)))
    nccf = frame_nccf(frames, hi + 1)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    hz = np.zeros(frames.shape[0])
    for t in range(frames.shape[0]):
        if rms[t] < cfg.silence_rms:
            continue
        lag, value = _pick_lag(nccf[t], lo, hi, cfg)
        if lag <= 0 or value < cfg.voicing_threshold:
            continue
        f0 = cfg.sample_rate / lag
        if cfg.f0_min <= f0 <= cfg.f0_max:
            hz[t] = f0
    return F0Contour.from_hz(hz)
