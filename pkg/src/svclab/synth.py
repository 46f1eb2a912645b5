"""Toy singing corpus: additive-synthesis pseudo-songs with per-singer timbre.

All singers sing the same melodies; singers differ only in spectral
envelope, so singer identity lives in timbre and content lives in the
phone track.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import (AudioClip, F0Config, MelConfig, UtteranceFeatures, align_features,
                       compute_mel, extract_f0, make_synthetic_ppg, save_audio)
from .features.ppg import write_phone_track


@dataclass(frozen=True)
class Note:
    midi: float
    phone: int
    frames: int


@dataclass(frozen=True)
class Timbre:
    tilt: float          # harmonic roll-off exponent
    formant_hz: float    # singer-specific resonance
    formant_gain: float
    breathiness: float   # relative level of aspiration noise


def make_song(rng: np.random.Generator, ppg_dim: int, min_frames: int = 48, max_frames: int = 72) -> list[Note]:
    total = int(rng.integers(min_frames, max_frames + 1))
    notes, used = [], 0
    while used < total:
        length = int(min(rng.integers(8, 17), total - used))
        notes.append(Note(float(rng.integers(55, 68)), int(rng.integers(0, ppg_dim)), length))
        used += length
    return notes


def make_timbres(n_singers: int, rng: np.random.Generator) -> list[Timbre]:
    tilts = np.linspace(0.6, 1.8, n_singers)
    formants = np.linspace(900.0, 3200.0, n_singers)
    order = rng.permutation(n_singers)
    return [Timbre(float(tilts[i]), float(formants[order[i]]), 6.0, 0.01 * (1 + i % 2))
            for i in range(n_singers)]


def _phone_formant(phone: int, ppg_dim: int) -> float:
    return 400.0 + 1800.0 * ((phone * 7) % ppg_dim) / max(ppg_dim - 1, 1)


def render_song(song: list[Note], timbre: Timbre, ppg_dim: int, seed: int, sample_rate: int = 24000,
                hop: int = 300, level: float = 0.3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = sum(note.frames for note in song) * hop
    f0 = np.concatenate([np.full(note.frames * hop, 440.0 * 2.0 ** ((note.midi - 69) / 12)) for note in song])
    formant = np.concatenate([np.full(note.frames * hop, _phone_formant(note.phone, ppg_dim)) for note in song])
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
    out = np.zeros(n)
    for h in range(1, 40):
        freq = h * f0
        amp = h ** -timbre.tilt
        amp = amp * (1.0 + timbre.formant_gain * np.exp(-0.5 * ((freq - timbre.formant_hz) / 250.0) ** 2))
        amp = amp * (1.0 + 3.0 * np.exp(-0.5 * ((freq - formant) / 200.0) ** 2))
        amp = np.where(freq < 0.45 * sample_rate, amp, 0.0)
        out += amp * np.sin(h * phase)
    envelope = np.ones(n)
    fade = hop
    start = 0
    for note in song:
        length = note.frames * hop
        ramp = np.minimum(1.0, np.minimum(np.arange(length) + 1, length - np.arange(length)) / fade)
        envelope[start:start + length] = ramp
        start += length
    out = out * envelope
    out = out / np.max(np.abs(out)) * level
    return out + timbre.breathiness * level * rng.standard_normal(n)


def phone_track(song: list[Note]) -> list[tuple[int, int]]:
    return [(note.phone, note.frames) for note in song]


@dataclass
class ToyUtterance:
    singer: int
    name: str
    clip: AudioClip
    track: list[tuple[int, int]]


def make_toy_corpus(n_singers: int = 4, utts_per_singer: int = 25, ppg_dim: int = 64, seed: int = 0,
                    sample_rate: int = 24000, hop: int = 300) -> list[ToyUtterance]:
    """Every singer sings the same ``utts_per_singer`` songs."""
    rng = np.random.default_rng(seed)
    songs = [make_song(rng, ppg_dim) for _ in range(utts_per_singer)]
    timbres = make_timbres(n_singers, rng)
    corpus = []
    for s, timbre in enumerate(timbres):
        for k, song in enumerate(songs):
            samples = render_song(song, timbre, ppg_dim, seed=seed * 100003 + s * 1009 + k,
                                  sample_rate=sample_rate, hop=hop)
            corpus.append(ToyUtterance(s, f"utt{k:03d}", AudioClip(samples, sample_rate), phone_track(song)))
    return corpus


def featurize(utt: ToyUtterance, ppg_dim: int, mel_cfg: MelConfig = MelConfig(),
              f0_cfg: F0Config = F0Config()) -> UtteranceFeatures:
    mel = compute_mel(utt.clip, mel_cfg)
    f0 = extract_f0(utt.clip, f0_cfg)
    ppg = make_synthetic_ppg(utt.track, ppg_dim)
    return align_features(ppg, f0, mel, utt.singer, utt.clip.sample_rate)


def toy_features(n_singers: int = 4, utts_per_singer: int = 25, ppg_dim: int = 64, seed: int = 0,
                 mel_cfg: MelConfig = MelConfig(), f0_cfg: F0Config = F0Config()) -> list[UtteranceFeatures]:
    return [featurize(u, ppg_dim, mel_cfg, f0_cfg)
            for u in make_toy_corpus(n_singers, utts_per_singer, ppg_dim, seed, mel_cfg.sample_rate, mel_cfg.hop)]


def write_toy_corpus(root: str | os.PathLike, n_singers: int = 2, utts_per_singer: int = 3,
                     ppg_dim: int = 64, seed: int = 0) -> Path:
    """Lay out ``<root>/<singer>/<utt>.wav`` with ``<utt>.phones`` sidecars."""
    root = Path(root)
    for utt in make_toy_corpus(n_singers, utts_per_singer, ppg_dim, seed):
        singer_dir = root / f"singer{utt.singer}"
        singer_dir.mkdir(parents=True, exist_ok=True)
        save_audio(singer_dir / f"{utt.name}.wav", utt.clip)
        write_phone_track(singer_dir / f"{utt.name}.phones", utt.track)
    return root
