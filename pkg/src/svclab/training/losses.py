"""Decoder, classification, regression and combined generator losses."""
from __future__ import annotations

import math

import torch
from torch.nn import functional as F

from ..model.decoder import DecoderOutput
from ..model.layers import length_mask


def _masked_mse(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean squared error over valid frames; ``mask`` is B x T."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    weights = mask.to(pred.dtype)[..., None]
    count = weights.sum() * pred.size(-1)
    return ((pred - target) ** 2 * weights).sum() / count


def step_stop_targets(stop: torch.Tensor, lengths: torch.Tensor, r: int, steps: int):
    """Per-decoder-step stop labels and validity mask.

    Step ``i`` emits frames ``[i*r, (i+1)*r)``; its label is the frame-level
    label of the last real frame it covers.
    """
    idx = torch.arange(steps, device=stop.device)[None, :]
    last = torch.minimum((idx + 1) * r, lengths[:, None]) - 1
    valid = idx * r < lengths[:, None]
    labels = torch.gather(stop, 1, last.clamp(min=0))
    return labels, valid


def loss_dec(out: DecoderOutput, mel: torch.Tensor, stop: torch.Tensor, lengths: torch.Tensor,
             r: int, double_mel_loss: bool = True) -> torch.Tensor:
    """Mel MSE (pre- and post-postnet) plus binary cross-entropy on stop tokens."""
    T = mel.size(1)
    if out.mel_out.size(1) < T:
        raise ValueError(f"decoder produced {out.mel_out.size(1)} frames for a {T}-frame target")
    mask = length_mask(lengths, T)
    mse = _masked_mse(out.mel_out[:, :T], mel, mask)
    if double_mel_loss:
        mse = mse + _masked_mse(out.mel_before[:, :T], mel, mask)
    labels, valid = step_stop_targets(stop, lengths, r, out.steps)
    bce = F.binary_cross_entropy_with_logits(out.stop_logits, labels, reduction="none")
    valid = valid.to(bce.dtype)
    return mse + (bce * valid).sum() / valid.sum()


def loss_d(log_probs: torch.Tensor, singer: torch.Tensor, lengths: torch.Tensor | None = None) -> torch.Tensor:
    """Frame-averaged singer cross-entropy per utterance, averaged over the batch.

    ``log_probs`` is B x N x S (log of the classifier posteriors).
    """
    B, N, S = log_probs.shape
    singer = torch.as_tensor(singer, dtype=torch.long).reshape(-1)
    if singer.numel() != B or int(singer.min()) < 0 or int(singer.max()) >= S:
        raise ValueError(f"singer ids {singer.tolist()} invalid for {S} classes")
    if lengths is None:
        lengths = torch.full((B,), N, dtype=torch.long)
    mask = length_mask(lengths, N).to(log_probs.dtype)
    picked = torch.gather(log_probs, 2, singer[:, None, None].expand(B, N, 1)).squeeze(-1)
    nll = -torch.where(mask > 0, picked, torch.zeros_like(picked))
    return (nll.sum(dim=1) / mask.sum(dim=1)).mean()


def loss_melenc(y_mout: torch.Tensor, target: torch.Tensor, lengths: torch.Tensor | None = None) -> torch.Tensor:
    if y_mout.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(y_mout.shape)} vs {tuple(target.shape)}")
    if lengths is None:
        return torch.mean((y_mout - target) ** 2)
    return _masked_mse(y_mout, target, length_mask(lengths, target.size(1)))


def loss_g(l_dec, l_melenc, l_d, gamma: float, lam: float, mel_regressor: bool = True,
           confusion: bool = True):
    """``l_dec + gamma * l_melenc - lam * l_d`` with disabled terms dropped."""
    total = l_dec
    if mel_regressor and l_melenc is not None:
        total = total + gamma * l_melenc
    if confusion and l_d is not None:
        total = total - lam * l_d
    return total


def is_finite(value) -> bool:
    if isinstance(value, torch.Tensor):
        return bool(torch.isfinite(value).all())
    return math.isfinite(value)
