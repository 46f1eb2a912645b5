"""Encoder-side networks: CBHG linguistic encoder, Mel encoder, singer classifier, mel regressor."""
from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence


def length_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    """B x T boolean mask, True on valid frames."""
    return torch.arange(max_len, device=lengths.device)[None, :] < lengths[:, None]


def run_bidirectional(rnn: nn.RNNBase, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
    out, _ = rnn(packed)
    out, _ = pad_packed_sequence(out, batch_first=True, total_length=x.size(1))
    return out


class Highway(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.transform = nn.Linear(dim, dim)
        self.gate = nn.Linear(dim, dim)
        nn.init.constant_(self.gate.bias, -1.0)

    def forward(self, x):
        gate = torch.sigmoid(self.gate(x))
        return gate * F.relu(self.transform(x)) + (1.0 - gate) * x


class CBHG(nn.Module):
    """Conv bank -> max-pool -> projections + residual -> highways -> BiGRU."""

    def __init__(self, in_dim: int, dim: int, bank_size: int = 8, bank_channels: int = 128,
                 highway_layers: int = 4):
        super().__init__()
        if dim % 2:
            raise ValueError("CBHG width must be even for the bidirectional layer")
        self.input_proj = nn.Linear(in_dim, dim)
        self.bank = nn.ModuleList(
            nn.Conv1d(dim, bank_channels, k, padding=k // 2) for k in range(1, bank_size + 1)
        )
        self.proj1 = nn.Conv1d(bank_size * bank_channels, dim, 3, padding=1)
        self.proj2 = nn.Conv1d(dim, dim, 3, padding=1)
        self.highways = nn.ModuleList(Highway(dim) for _ in range(highway_layers))
        self.rnn = nn.GRU(dim, dim // 2, batch_first=True, bidirectional=True)

    def forward(self, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        T = x.size(1)
        mask = length_mask(lengths, T)[:, None, :].to(x.dtype)  # B x 1 x T
        residual = F.relu(self.input_proj(x)).transpose(1, 2) * mask
        bank = torch.cat([F.relu(conv(residual)[:, :, :T]) for conv in self.bank], dim=1)
        # window (t-1, t): never reaches forward into padding
        pooled = F.max_pool1d(bank, kernel_size=2, stride=1, padding=1)[:, :, :T] * mask
        y = F.relu(self.proj1(pooled)) * mask
        y = (self.proj2(y) + residual).transpose(1, 2)
        for highway in self.highways:
            y = highway(y)
        return run_bidirectional(self.rnn, y, lengths)


class FrameNorm(nn.Module):
    """Normalizes each frame over (channel, frequency); keeps frames independent."""

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):  # B x C x T x F
        mean = x.mean(dim=(1, 3), keepdim=True)
        var = x.var(dim=(1, 3), keepdim=True, unbiased=False)
        x = (x - mean) / torch.sqrt(var + self.eps)
        return x * self.weight[None, :, None, None] + self.bias[None, :, None, None]


class MelEncoder(nn.Module):
    """Frequency max-pool -> six 2-D convs -> BiGRU -> low-dimensional per-frame code."""

    def __init__(self, n_mels: int, channels=(32, 32, 64, 64, 128, 128), gru_dim: int = 64,
                 code_dim: int = 4):
        super().__init__()
        if gru_dim % 2:
            raise ValueError("mel encoder GRU width must be even")
        chans = (1,) + tuple(channels)
        self.convs = nn.ModuleList(
            nn.Conv2d(chans[i], chans[i + 1], kernel_size=3, padding=1) for i in range(len(channels))
        )
        self.norms = nn.ModuleList(FrameNorm(c) for c in channels)
        self.freq_bins = n_mels // 2
        self.rnn = nn.GRU(channels[-1] * self.freq_bins, gru_dim // 2, batch_first=True,
                          bidirectional=True)
        self.proj = nn.Linear(gru_dim, code_dim)

    def forward(self, mel: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        B, T, _ = mel.shape
        mask = length_mask(lengths, T)[:, None, :, None].to(mel.dtype)  # B x 1 x T x 1
        x = F.max_pool2d(mel.unsqueeze(1), kernel_size=(1, 2)) * mask
        for conv, norm in zip(self.convs, self.norms):
            x = F.relu(norm(conv(x))) * mask
        x = x.permute(0, 2, 1, 3).reshape(B, T, -1)
        return self.proj(run_bidirectional(self.rnn, x, lengths))


class SingerClassifier(nn.Module):
    """Three time convolutions and a per-frame dense layer over singer classes."""

    def __init__(self, code_dim: int, channels: int, singer_count: int):
        super().__init__()
        self.convs = nn.ModuleList([
            nn.Conv1d(code_dim, channels, 3, padding=1),
            nn.Conv1d(channels, channels, 3, padding=1),
            nn.Conv1d(channels, channels, 3, padding=1),
        ])
        self.out = nn.Linear(channels, singer_count)
        # near-uniform posteriors at initialization
        nn.init.normal_(self.out.weight, std=0.01)
        nn.init.zeros_(self.out.bias)

    def forward(self, code: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Returns per-frame log-probabilities, B x T x S."""
        mask = length_mask(lengths, code.size(1))[:, None, :].to(code.dtype)
        x = code.transpose(1, 2) * mask
        for conv in self.convs:
            x = F.relu(conv(x)) * mask
        return F.log_softmax(self.out(x.transpose(1, 2)), dim=-1)


class MelRegressor(nn.Module):
    """Residual ReLU MLP predicting the mel frame from (code, singer embedding)."""

    def __init__(self, in_dim: int, width: int, n_mels: int, depth: int = 3):
        super().__init__()
        self.layers = nn.ModuleList(nn.Linear(in_dim if i == 0 else width, width) for i in range(depth))
        self.adapter = nn.Linear(in_dim, width, bias=False) if in_dim != width else nn.Identity()
        self.proj = nn.Linear(width, n_mels)

    def forward(self, x):
        h = F.relu(self.layers[0](x)) + self.adapter(x)
        for layer in self.layers[1:]:
            h = F.relu(layer(h)) + h
        return self.proj(h)
