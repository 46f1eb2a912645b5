"""Post-hoc probe: how much singer identity a fresh classifier can recover from Mel codes."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch

from ..features import UtteranceFeatures
from ..model import Batch, SVCModel
from ..model.layers import SingerClassifier, length_mask
from ..training.losses import loss_d


class ProbeError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeConfig:
    steps: int = 2000
    lr: float = 1e-3
    test_fraction: float = 0.2
    channels: int = 64
    seed: int = 0


@dataclass(frozen=True)
class ProbeReport:
    probe_accuracy: float
    chance: float
    n_frames: int
    train_accuracy: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


def extract_codes(model: SVCModel, corpus: list[UtteranceFeatures]) -> list[np.ndarray]:
    model.eval()
    dtype = next(model.parameters()).dtype
    codes = []
    with torch.no_grad():
        for utt in corpus:
            batch = Batch.collate([utt], dtype=dtype)
            codes.append(model.mel_encode(batch.mel, batch.lengths)[0].to(torch.float64).numpy())
    return codes


def split_per_singer(singers: list[int], test_fraction: float) -> tuple[list[int], list[int]]:
    """The last ``test_fraction`` of each singer's utterances (in corpus order) is held out."""
    train, test = [], []
    for s in sorted(set(singers)):
        idx = [i for i, x in enumerate(singers) if x == s]
        n_test = int(round(len(idx) * test_fraction))
        if n_test < 1 or n_test >= len(idx):
            raise ProbeError(f"singer {s}: {len(idx)} utterances cannot be split at {test_fraction}")
        train += idx[:-n_test]
        test += idx[-n_test:]
    return train, test


def _pad(codes: list[np.ndarray]) -> tuple[torch.Tensor, torch.Tensor]:
    T = max(c.shape[0] for c in codes)
    out = np.zeros((len(codes), T, codes[0].shape[1]))
    for i, c in enumerate(codes):
        out[i, :c.shape[0]] = c
    return torch.as_tensor(out, dtype=torch.float32), torch.as_tensor([c.shape[0] for c in codes])


def _frame_accuracy(clf, codes, singers) -> tuple[float, int]:
    x, lengths = _pad(codes)
    with torch.no_grad():
        pred = clf(x, lengths).argmax(dim=-1)
    mask = length_mask(lengths, x.size(1))
    hits = (pred == torch.as_tensor(singers)[:, None]) & mask
    return float(hits.sum()) / float(mask.sum()), int(mask.sum())


def probe_codes(codes: list[np.ndarray], singers: list[int], cfg: ProbeConfig = ProbeConfig(),
                n_singers: int | None = None) -> ProbeReport:
    """Train a fresh per-frame classifier on a train split; score frame accuracy on the rest."""
    if len(codes) != len(singers):
        raise ProbeError("codes and singer labels differ in length")
    classes = sorted(set(singers))
    if len(classes) < 2:
        raise ProbeError("the probe needs at least two singers")
    n_singers = n_singers or (max(classes) + 1)
    train_idx, test_idx = split_per_singer(list(singers), cfg.test_fraction)
    torch.manual_seed(cfg.seed)
    clf = SingerClassifier(codes[0].shape[1], cfg.channels, n_singers)
    opt = torch.optim.Adam(clf.parameters(), lr=cfg.lr)
    x, lengths = _pad([codes[i] for i in train_idx])
    # standardize with train statistics so the probe budget does not depend on code scale
    valid = length_mask(lengths, x.size(1))
    mean = x[valid].mean(dim=0)
    std = x[valid].std(dim=0).clamp(min=1e-6)
    scale = lambda c: (c - mean.numpy()) / std.numpy()
    x, _ = _pad([scale(codes[i]) for i in train_idx])
    y = torch.as_tensor([singers[i] for i in train_idx])
    for _ in range(cfg.steps):
        opt.zero_grad()
        loss = loss_d(clf(x, lengths), y, lengths)
        loss.backward()
        opt.step()
    clf.eval()
    train_acc, _ = _frame_accuracy(clf, [scale(codes[i]) for i in train_idx], [singers[i] for i in train_idx])
    test_acc, n_frames = _frame_accuracy(clf, [scale(codes[i]) for i in test_idx], [singers[i] for i in test_idx])
    return ProbeReport(probe_accuracy=test_acc, chance=1.0 / n_singers, n_frames=n_frames,
                       train_accuracy=train_acc)


def disentanglement_probe(model: SVCModel, corpus: list[UtteranceFeatures],
                          cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    codes = extract_codes(model, corpus)
    return probe_codes(codes, [u.singer for u in corpus], cfg, n_singers=model.cfg.singer_count)
