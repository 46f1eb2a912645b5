"""Noise-robustness sweep: noisy source -> conversion -> vocoder -> reference-free SNR."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from ..features import (AudioClip, F0Config, MelConfig, PPGSequence, add_white_noise, align_features,
                        compute_mel, extract_f0, griffin_lim)
from ..model import SVCModel, convert
from .metrics import snr_estimate, snr_with_reference


@dataclass(frozen=True)
class SweepRow:
    level_db: float
    source_snr: float
    converted_snr: float


def parse_levels(text: str) -> list[float]:
    levels = [float(x) for x in text.split(",") if x.strip()]
    if not levels:
        raise ValueError("no noise levels given")
    return levels


def noise_robustness_sweep(model: SVCModel, source: AudioClip, ppg: PPGSequence, target_singer: int,
                           levels: list[float], seed: int = 0, mel_cfg: MelConfig = MelConfig(),
                           f0_cfg: F0Config = F0Config(), gl_iters: int = 32,
                           use_mel_encoder: bool = True) -> list[SweepRow]:
    """One row per level; ``inf`` means the clean source.

    The PPG is supplied by the caller: it comes from the content pathway,
    which this toolkit does not recompute from noisy audio.
    """
    if not levels:
        raise ValueError("levels must be non-empty")
    rows = []
    for level in levels:
        noisy = add_white_noise(source, level, seed)
        source_snr = snr_with_reference(source, noisy).snr_db
        utt = align_features(ppg, extract_f0(noisy, f0_cfg), compute_mel(noisy, mel_cfg), target_singer,
                             noisy.sample_rate)
        mel, _ = convert(model, utt, target_singer, seed=seed, use_mel_encoder=use_mel_encoder)
        audio = griffin_lim(mel, gl_iters, mel_cfg, seed=seed)
        rows.append(SweepRow(float(level), source_snr, snr_estimate(audio).snr_db))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    fmt = lambda v: "inf" if math.isinf(v) and v > 0 else repr(float(v))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["level_db", "source_snr", "converted_snr"])
    for row in rows:
        writer.writerow([fmt(row.level_db), fmt(row.source_snr), fmt(row.converted_snr)])
    return buf.getvalue()
