"""The conversion network, its parameter partitions and the inference path."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..features import F0Contour, MelSpectrogram, PPGSequence, UtteranceFeatures
from .config import ModelConfig
from .decoder import Decoder, DecoderOutput
from .layers import CBHG, MelEncoder, MelRegressor, SingerClassifier, length_mask

GENERATOR = "gen"
CLASSIFIER = "cls"


@dataclass
class Batch:
    """Zero-padded, frame-aligned tensors for B utterances."""

    ppg: torch.Tensor        # B x T x P
    log_f0: torch.Tensor     # B x T
    voicing: torch.Tensor    # B x T
    mel: torch.Tensor        # B x T x M
    stop: torch.Tensor       # B x T
    singer: torch.Tensor     # B, long
    lengths: torch.Tensor    # B, long

    @property
    def size(self) -> int:
        return self.singer.numel()

    @property
    def mask(self) -> torch.Tensor:
        return length_mask(self.lengths, self.mel.size(1))

    @classmethod
    def collate(cls, utts: list[UtteranceFeatures], dtype=torch.float32) -> "Batch":
        if not utts:
            raise ValueError("cannot collate an empty batch")
        T = max(u.frames for u in utts)
        B = len(utts)

        def pad(arrays, trailing=()):
            out = np.zeros((B, T) + trailing, dtype=np.float64)
            for i, a in enumerate(arrays):
                out[i, :a.shape[0]] = a
            return torch.as_tensor(out, dtype=dtype)

        return cls(
            ppg=pad([u.ppg.probs for u in utts], (utts[0].ppg.dim,)),
            log_f0=pad([u.f0.log_f0 for u in utts]),
            voicing=pad([u.f0.voicing for u in utts]),
            mel=pad([u.mel.frames for u in utts], (utts[0].mel.n_mels,)),
            stop=pad([u.stop_targets for u in utts]),
            singer=torch.as_tensor([u.singer for u in utts], dtype=torch.long),
            lengths=torch.as_tensor([u.frames for u in utts], dtype=torch.long),
        )

    def to(self, dtype) -> "Batch":
        cast = lambda t: t.to(dtype)
        return Batch(cast(self.ppg), cast(self.log_f0), cast(self.voicing), cast(self.mel),
                     cast(self.stop), self.singer, self.lengths)


class Generator(nn.Module):
    """Everything except the adversarial singer classifier."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.encoder = CBHG(cfg.ppg_dim, cfg.enc_dim, cfg.cbhg_bank_size, cfg.cbhg_bank_channels,
                            cfg.highway_layers)
        self.mel_encoder = MelEncoder(cfg.n_mels, cfg.mel_enc_channels, cfg.mel_enc_gru_dim,
                                      cfg.mel_code_dim)
        self.singer_table = nn.Embedding(cfg.singer_count, cfg.singer_emb_dim)
        self.decoder = Decoder(
            cfg.conditioning_dim, cfg.n_mels, cfg.dec_dim, cfg.prenet_dim, cfg.prenet_dropout,
            cfg.gmm_mixtures, cfg.reduction_factor, cfg.postnet_channels, cfg.postnet_kernel,
            cfg.postnet_layers,
        )
        self.regressor = MelRegressor(cfg.mel_code_dim + cfg.singer_emb_dim, cfg.regressor_width,
                                      cfg.n_mels)


class SVCModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.gen = Generator(cfg)
        self.cls = SingerClassifier(cfg.mel_code_dim, cfg.classifier_channels, cfg.singer_count)

    # -- partitions ---------------------------------------------------------

    @staticmethod
    def partition_of(name: str) -> str:
        head = name.split(".", 1)[0].split("/", 1)[0]
        if head not in (GENERATOR, CLASSIFIER):
            raise KeyError(f"parameter {name!r} belongs to no partition")
        return head

    def partition(self, which: str) -> dict[str, nn.Parameter]:
        return {n: p for n, p in self.named_parameters() if self.partition_of(n) == which}

    def generator_parameters(self):
        return list(self.gen.parameters())

    def classifier_parameters(self):
        return list(self.cls.parameters())

    # -- components ---------------------------------------------------------

    def linguistic_encode(self, ppg: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        if ppg.size(-1) != self.cfg.ppg_dim:
            raise ValueError(f"PPG dimension {ppg.size(-1)} != configured {self.cfg.ppg_dim}")
        return self.gen.encoder(ppg, lengths)

    def mel_encode(self, mel: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        if mel.size(-1) != self.cfg.n_mels:
            raise ValueError(f"mel dimension {mel.size(-1)} != configured {self.cfg.n_mels}")
        return self.gen.mel_encoder(mel, lengths)

    def lookup_singer(self, singer: torch.Tensor) -> torch.Tensor:
        singer = torch.as_tensor(singer, dtype=torch.long)
        if singer.numel() and (int(singer.min()) < 0 or int(singer.max()) >= self.cfg.singer_count):
            raise ValueError(f"singer id out of range [0, {self.cfg.singer_count})")
        return self.gen.singer_table(singer)

    def f0_features(self, log_f0: torch.Tensor, voicing: torch.Tensor) -> torch.Tensor:
        if self.cfg.f0_normalize:
            log_f0 = (log_f0 - self.cfg.f0_mean) / self.cfg.f0_std * voicing
        return torch.stack([log_f0, voicing], dim=-1)

    def build_decoder_input(self, enc, code, singer_emb, log_f0, voicing) -> torch.Tensor:
        """Frame-wise concatenation (enc, code, singer embedding, log F0, voicing)."""
        T = enc.size(1)
        if code.size(1) != T or log_f0.size(1) != T or voicing.size(1) != T:
            raise ValueError("conditioning streams differ in length")
        emb = singer_emb[:, None, :].expand(-1, T, -1)
        return torch.cat([enc, code, emb, self.f0_features(log_f0, voicing)], dim=-1)

    def decode(self, conditioned, lengths, teacher=None, teacher_lengths=None, generator=None,
               max_steps=None) -> DecoderOutput:
        return self.gen.decoder(conditioned, lengths, teacher, teacher_lengths, generator, max_steps)

    def classify_singer(self, code: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Per-frame log posteriors over singers."""
        if code.size(-1) != self.cfg.mel_code_dim:
            raise ValueError(f"code width {code.size(-1)} != {self.cfg.mel_code_dim}")
        return self.cls(code, lengths)

    def mel_regress(self, code: torch.Tensor, singer_emb: torch.Tensor) -> torch.Tensor:
        if code.size(-1) != self.cfg.mel_code_dim or singer_emb.size(-1) != self.cfg.singer_emb_dim:
            raise ValueError("mel regressor input width mismatch")
        emb = singer_emb[:, None, :].expand(-1, code.size(1), -1)
        return self.gen.regressor(torch.cat([code, emb], dim=-1))

    def zero_code(self, batch: Batch) -> torch.Tensor:
        return batch.mel.new_zeros(batch.size, batch.mel.size(1), self.cfg.mel_code_dim)


def convert(model: SVCModel, source: UtteranceFeatures, target_singer: int, seed: int = 0,
            use_mel_encoder: bool = True, f0_shift_semitones: float = 0.0,
            max_steps: int | None = None) -> tuple[MelSpectrogram, DecoderOutput]:
    """Source features + target singer -> converted mel spectrogram.

    Only the inference path runs: the classifier and the regressor are never
    evaluated. ``f0_shift_semitones`` transposes the voiced source F0.
    """
    if source.frames == 0:
        raise ValueError("empty source utterance")
    was_training = model.training
    model.eval()
    dtype = next(model.parameters()).dtype
    batch = Batch.collate([source], dtype=dtype)
    log_f0 = batch.log_f0
    if f0_shift_semitones:
        log_f0 = log_f0 + batch.voicing * (f0_shift_semitones * math.log(2.0) / 12.0)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        enc = model.linguistic_encode(batch.ppg, batch.lengths)
        code = model.mel_encode(batch.mel, batch.lengths) if use_mel_encoder else model.zero_code(batch)
        emb = model.lookup_singer(torch.tensor([target_singer]))
        cond = model.build_decoder_input(enc, code, emb, log_f0, batch.voicing)
        out = model.decode(cond, batch.lengths, generator=gen, max_steps=max_steps)
    model.train(was_training)
    frames = out.mel_out[0].to(torch.float32).numpy()
    return MelSpectrogram(frames, source.mel.hop_samples, source.mel.win_samples), out
