"""Griffin-Lim phase reconstruction from log-mel spectrograms."""
from __future__ import annotations

import numpy as np

from .audio import AudioClip
from .mel import LOG_FLOOR, MelConfig, MelSpectrogram, istft, mel_filterbank, mel_pseudo_inverse, stft


def mel_to_magnitude(mel: MelSpectrogram, cfg: MelConfig, refine_iters: int = 100) -> np.ndarray:
    """Linear magnitude from log-mel.

    The clipped pseudo-inverse smears each band over its whole triangle; a few
    multiplicative non-negative least-squares updates sharpen it back.
    """
    energies = np.exp(mel.frames.astype(np.float64))
    # floor-level bins carry no energy; keep them silent rather than at 1e-5
    energies[mel.frames <= np.log(LOG_FLOOR) + 1e-6] = 0.0
    fb = mel_filterbank(cfg.sample_rate, cfg.win, cfg.n_mels, cfg.fmin, cfg.fmax)
    inv = mel_pseudo_inverse(cfg.sample_rate, cfg.win, cfg.n_mels, cfg.fmin, cfg.fmax)
    mag = np.maximum(energies @ inv.T, 0.0) + 1e-12
    target = energies @ fb
    for _ in range(refine_iters):
        mag *= target / np.maximum((mag @ fb.T) @ fb, 1e-30)
    return mag


def griffin_lim(mel: MelSpectrogram, n_iters: int = 32, cfg: MelConfig | None = None,
                seed: int = 0) -> AudioClip:
    if n_iters < 1:
        raise ValueError(f"n_iters must be >= 1, got {n_iters}")
    cfg = cfg or MelConfig(n_mels=mel.n_mels, hop=mel.hop_samples, win=mel.win_samples)
    magnitude = mel_to_magnitude(mel, cfg)
    length = len(mel) * cfg.hop
    rng = np.random.default_rng(seed)
    phase = np.exp(2j * np.pi * rng.random(magnitude.shape))
    signal = istft(magnitude * phase, cfg.hop, cfg.win, length)
    for _ in range(n_iters):
        rebuilt = stft(signal, cfg.hop, cfg.win)[:magnitude.shape[0]]
        phase = np.exp(1j * np.angle(rebuilt))
        signal = istft(magnitude * phase, cfg.hop, cfg.win, length)
    peak = np.max(np.abs(signal)) if signal.size else 0.0
    if peak > 0.95:
        signal = signal * (0.95 / peak)
    return AudioClip(signal, cfg.sample_rate)
