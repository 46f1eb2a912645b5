"""Autoregressive mel decoder with monotone GMM attention."""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .layers import length_mask

MIN_SIGMA = 0.1


@dataclass
class DecoderOutput:
    mel_before: torch.Tensor      # B x T_out x M, pre-postnet
    mel_out: torch.Tensor         # B x T_out x M, post-postnet
    stop_logits: torch.Tensor     # B x steps
    attention_trace: torch.Tensor  # B x steps x K, mixture means
    alignments: torch.Tensor      # B x steps x T_in
    max_steps_reached: bool = False

    @property
    def steps(self) -> int:
        return self.stop_logits.size(1)


def _inverse_softplus(y: float) -> float:
    return math.log(math.expm1(y))


class GMMAttention(nn.Module):
    """Mixture-of-Gaussians alignment whose means only move forward.

    Each step predicts mixture weights (softmax), widths (softplus) and mean
    increments (softplus), so every mean trace is non-decreasing by
    construction. Alignment weights are the Gaussian mass falling on each
    input position, integrated over [j - 1/2, j + 1/2].
    """

    def __init__(self, query_dim: int, mixtures: int, hidden: int, initial_step: float = 1.0):
        super().__init__()
        self.mixtures = mixtures
        self.mlp = nn.Sequential(nn.Linear(query_dim, hidden), nn.Tanh(), nn.Linear(hidden, 3 * mixtures))
        with torch.no_grad():
            bias = self.mlp[2].bias
            bias.zero_()
            bias[mixtures:2 * mixtures] = _inverse_softplus(initial_step)
            bias[2 * mixtures:] = _inverse_softplus(1.0)

    def forward(self, query, prev_mu, memory, mask):
        w_hat, delta_hat, sigma_hat = self.mlp(query).chunk(3, dim=-1)
        weights = torch.softmax(w_hat, dim=-1)
        mu = prev_mu + F.softplus(delta_hat)
        sigma = F.softplus(sigma_hat) + MIN_SIGMA
        pos = torch.arange(memory.size(1), device=memory.device, dtype=memory.dtype)[None, None, :]
        scale = sigma[..., None] * math.sqrt(2.0)
        upper = torch.erf((pos + 0.5 - mu[..., None]) / scale)
        lower = torch.erf((pos - 0.5 - mu[..., None]) / scale)
        align = (weights[..., None] * 0.5 * (upper - lower)).sum(dim=1) * mask
        context = torch.bmm(align.unsqueeze(1), memory).squeeze(1)
        return context, align, mu


class Prenet(nn.Module):
    """Two ReLU layers with dropout that stays on at inference.

    Dropout masks are drawn from an explicit generator so decoding is
    reproducible per seed.
    """

    def __init__(self, in_dim: int, dim: int, dropout: float):
        super().__init__()
        self.layers = nn.ModuleList([nn.Linear(in_dim, dim), nn.Linear(dim, dim)])
        self.dropout = dropout

    def forward(self, x, generator: torch.Generator | None = None):
        for layer in self.layers:
            x = F.relu(layer(x))
            if self.dropout > 0:
                keep = 1.0 - self.dropout
                probs = torch.full(x.shape, keep, dtype=x.dtype, device=x.device)
                x = x * torch.bernoulli(probs, generator=generator) / keep
        return x


class Postnet(nn.Module):
    def __init__(self, n_mels: int, channels: int, kernel: int, layers: int):
        super().__init__()
        dims = [n_mels] + [channels] * (layers - 1) + [n_mels]
        self.convs = nn.ModuleList(
            nn.Conv1d(dims[i], dims[i + 1], kernel, padding=kernel // 2) for i in range(layers)
        )

    def forward(self, mel, mask):  # mel: B x T x M, mask: B x 1 x T
        x = mel.transpose(1, 2) * mask
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < len(self.convs) - 1:
                x = torch.tanh(x)
            x = x * mask
        return x.transpose(1, 2)


class Decoder(nn.Module):
    def __init__(self, cond_dim: int, n_mels: int, dec_dim: int = 512, prenet_dim: int = 256,
                 prenet_dropout: float = 0.5, mixtures: int = 5, reduction_factor: int = 2,
                 postnet_channels: int = 512, postnet_kernel: int = 5, postnet_layers: int = 5):
        super().__init__()
        self.n_mels = n_mels
        self.r = reduction_factor
        self.prenet = Prenet(n_mels, prenet_dim, prenet_dropout)
        self.attention_rnn = nn.LSTMCell(prenet_dim + cond_dim, dec_dim)
        self.attention = GMMAttention(dec_dim, mixtures, hidden=dec_dim, initial_step=reduction_factor)
        self.decoder_rnn = nn.LSTMCell(dec_dim + cond_dim, dec_dim)
        self.frame_proj = nn.Linear(dec_dim + cond_dim, n_mels * reduction_factor)
        self.stop_proj = nn.Linear(dec_dim + cond_dim, 1)
        self.postnet = Postnet(n_mels, postnet_channels, postnet_kernel, postnet_layers)

    def _initial_state(self, memory):
        B = memory.size(0)
        zeros = lambda dim: memory.new_zeros(B, dim)
        hidden = self.attention_rnn.hidden_size
        return {
            "att": (zeros(hidden), zeros(hidden)),
            "dec": (zeros(hidden), zeros(hidden)),
            "mu": zeros(self.attention.mixtures),
            "context": zeros(memory.size(2)),
        }

    def _step(self, prenet_out, state, memory, mem_mask):
        att = self.attention_rnn(torch.cat([prenet_out, state["context"]], dim=-1), state["att"])
        context, align, mu = self.attention(att[0], state["mu"], memory, mem_mask)
        dec = self.decoder_rnn(torch.cat([att[0], context], dim=-1), state["dec"])
        out = torch.cat([dec[0], context], dim=-1)
        frames = self.frame_proj(out).view(-1, self.r, self.n_mels)
        stop = self.stop_proj(out).squeeze(-1)
        return frames, stop, align, {"att": att, "dec": dec, "mu": mu, "context": context}

    def _finish(self, frames, stops, aligns, mus, out_lengths, max_steps_reached=False):
        mel_before = torch.cat(frames, dim=1)
        mask = length_mask(out_lengths, mel_before.size(1))[:, None, :].to(mel_before.dtype)
        mel_before = mel_before * mask.transpose(1, 2)
        mel_out = mel_before + self.postnet(mel_before, mask)
        return DecoderOutput(
            mel_before=mel_before,
            mel_out=mel_out,
            stop_logits=torch.stack(stops, dim=1),
            attention_trace=torch.stack(mus, dim=1),
            alignments=torch.stack(aligns, dim=1),
            max_steps_reached=max_steps_reached,
        )

    def forward(self, memory, memory_lengths, teacher=None, teacher_lengths=None,
                generator: torch.Generator | None = None, max_steps: int | None = None):
        """Teacher-forced when ``teacher`` (B x T x M) is given, free-running otherwise."""
        if memory.size(1) == 0:
            raise ValueError("cannot decode an empty conditioning sequence")
        mem_mask = length_mask(memory_lengths, memory.size(1)).to(memory.dtype)
        state = self._initial_state(memory)
        frames, stops, aligns, mus = [], [], [], []
        go = memory.new_zeros(memory.size(0), 1, self.n_mels)
        if teacher is not None:
            if teacher_lengths is None:
                teacher_lengths = torch.full((teacher.size(0),), teacher.size(1), dtype=torch.long)
            steps = math.ceil(teacher.size(1) / self.r)
            inputs = torch.cat([go, teacher[:, self.r - 1:(steps - 1) * self.r:self.r]], dim=1)
            prenet_all = self.prenet(inputs, generator)
            for i in range(steps):
                f, s, a, state = self._step(prenet_all[:, i], state, memory, mem_mask)
                frames.append(f); stops.append(s); aligns.append(a); mus.append(state["mu"])
            out_lengths = torch.div(teacher_lengths + self.r - 1, self.r, rounding_mode="floor") * self.r
            return self._finish(frames, stops, aligns, mus, out_lengths)

        if memory.size(0) != 1:
            raise ValueError("free-running decode supports a single sequence")
        max_steps = max_steps or 3 * int(memory_lengths.max())
        prev = go[:, 0]
        reached = True
        for _ in range(max_steps):
            f, s, a, state = self._step(self.prenet(prev, generator), state, memory, mem_mask)
            frames.append(f); stops.append(s); aligns.append(a); mus.append(state["mu"])
            prev = f[:, -1]
            if torch.sigmoid(s).item() > 0.5:
                reached = False
                break
        out_lengths = torch.full((1,), len(frames) * self.r, dtype=torch.long)
        return self._finish(frames, stops, aligns, mus, out_lengths, max_steps_reached=reached)
