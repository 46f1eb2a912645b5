"""Two-step adversarial training loop.

Each iteration runs ``d_steps_per_g`` classifier updates on frozen Mel-encoder
codes, then one update of every generator weight against
``l_dec + gamma * l_melenc - lam * l_d``.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..features import UtteranceFeatures
from ..model import Batch, ModelConfig, SVCModel, save_checkpoint
from .config import TrainConfig
from .losses import loss_d, loss_dec, loss_g, loss_melenc

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "l_dec", "l_d", "l_melenc", "l_g", "lr")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class LossBreakdown:
    step: int
    l_dec: float
    l_d: float | None = None
    l_melenc: float | None = None
    l_g: float = 0.0
    lr: float = 0.0

    def row(self) -> list[str]:
        fmt = lambda v: "" if v is None else repr(float(v))
        return [str(self.step), fmt(self.l_dec), fmt(self.l_d), fmt(self.l_melenc), fmt(self.l_g),
                fmt(self.lr)]


def build_model(cfg: ModelConfig, seed: int = 0, dtype=torch.float32) -> SVCModel:
    torch.manual_seed(seed)
    return SVCModel(cfg).to(dtype)


def make_optimizers(model: SVCModel, cfg: TrainConfig):
    kw = dict(lr=cfg.lr_init, betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_eps)
    return (torch.optim.Adam(model.generator_parameters(), **kw),
            torch.optim.Adam(model.classifier_parameters(), **kw))


def generator_losses(model: SVCModel, batch: Batch, cfg: TrainConfig,
                     generator: torch.Generator | None = None) -> dict:
    """Full teacher-forced forward; returns every enabled loss term and ``l_g``."""
    enc = model.linguistic_encode(batch.ppg, batch.lengths)
    code = model.mel_encode(batch.mel, batch.lengths) if cfg.mel_encoder else model.zero_code(batch)
    emb = model.lookup_singer(batch.singer)
    cond = model.build_decoder_input(enc, code, emb, batch.log_f0, batch.voicing)
    out = model.decode(cond, batch.lengths, teacher=batch.mel, teacher_lengths=batch.lengths,
                       generator=generator)
    terms = {"dec_out": out, "code": code}
    terms["l_dec"] = loss_dec(out, batch.mel, batch.stop, batch.lengths, model.cfg.reduction_factor,
                              cfg.double_mel_loss)
    terms["l_d"] = None
    terms["l_melenc"] = None
    if cfg.confusion:
        terms["l_d"] = loss_d(model.classify_singer(code, batch.lengths), batch.singer, batch.lengths)
    if cfg.mel_regressor:
        terms["l_melenc"] = loss_melenc(model.mel_regress(code, emb), batch.mel, batch.lengths)
    terms["l_g"] = loss_g(terms["l_dec"], terms["l_melenc"], terms["l_d"], cfg.gamma, cfg.lam,
                          cfg.mel_regressor, cfg.confusion)
    return terms


def train_step_discriminator(model: SVCModel, batch: Batch, optimizer: torch.optim.Optimizer) -> float:
    """Update only the classifier on codes computed without generator gradients."""
    if batch.size == 0:
        raise ValueError("empty batch")
    with torch.no_grad():
        code = model.mel_encode(batch.mel, batch.lengths)
    l_d = loss_d(model.classify_singer(code, batch.lengths), batch.singer, batch.lengths)
    optimizer.zero_grad(set_to_none=True)
    l_d.backward()
    optimizer.step()
    return float(l_d.detach())


def train_step_generator(model: SVCModel, batch: Batch, optimizer: torch.optim.Optimizer,
                         cfg: TrainConfig, generator: torch.Generator | None = None) -> dict:
    """Update only the generator; the classifier stays in the graph but frozen."""
    if batch.size == 0:
        raise ValueError("empty batch")
    frozen = model.classifier_parameters()
    for p in frozen:
        p.requires_grad_(False)
    try:
        terms = generator_losses(model, batch, cfg, generator)
        if not torch.isfinite(terms["l_g"]):
            return terms
        optimizer.zero_grad(set_to_none=True)
        terms["l_g"].backward()
        if cfg.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(model.generator_parameters(), cfg.grad_clip)
        optimizer.step()
    finally:
        for p in frozen:
            p.requires_grad_(True)
    return terms


def _to_float(v):
    if v is None:
        return None
    return float(v.detach()) if isinstance(v, torch.Tensor) else float(v)


@dataclass
class TrainResult:
    model: SVCModel
    history: list[LossBreakdown] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)


class Trainer:
    def __init__(self, model: SVCModel, cfg: TrainConfig, corpus: list[UtteranceFeatures],
                 out_dir: str | os.PathLike | None = None, meta: dict | None = None):
        if not corpus:
            raise ValueError("training corpus is empty")
        bad = [u.singer for u in corpus if u.singer >= model.cfg.singer_count]
        if bad:
            raise ValueError(f"singer ids {sorted(set(bad))} exceed singer_count {model.cfg.singer_count}")
        self.model = model
        self.cfg = cfg
        self.corpus = corpus
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.meta = dict(meta or {})
        self.gen_opt, self.cls_opt = make_optimizers(model, cfg)
        self.rng = np.random.default_rng(cfg.seed)
        self.dropout_gen = torch.Generator().manual_seed(cfg.seed)
        self.dtype = next(model.parameters()).dtype
        self.step = 0
        self._order: list[int] = []
        self.history: list[LossBreakdown] = []
        self.checkpoints: list[Path] = []

    def next_batch(self) -> Batch:
        size = min(self.cfg.batch_size, len(self.corpus))
        picks = []
        while len(picks) < size:
            if not self._order:
                self._order = list(self.rng.permutation(len(self.corpus)))
            picks.append(self._order.pop())
        return Batch.collate([self.corpus[i] for i in picks], dtype=self.dtype)

    def _set_lr(self, lr):
        for opt in (self.gen_opt, self.cls_opt):
            for group in opt.param_groups:
                group["lr"] = lr

    def _dump(self, batch: Batch, terms: dict):
        message = (f"non-finite loss at step {self.step}: "
                   + ", ".join(f"{k}={_to_float(terms[k])}" for k in ("l_dec", "l_d", "l_melenc", "l_g")))
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            path = self.out_dir / f"nan_batch_step{self.step}.npz"
            np.savez(path, **{k: getattr(batch, k).numpy() for k in
                              ("ppg", "log_f0", "voicing", "mel", "stop", "singer", "lengths")})
            message += f"; batch dumped to {path}"
        raise TrainingDiverged(message)

    def run_step(self) -> LossBreakdown:
        lr = self.cfg.lr_at(self.step)
        self._set_lr(lr)
        batch = self.next_batch()
        self.model.train()
        if self.cfg.confusion:
            for _ in range(self.cfg.d_steps_per_g):
                train_step_discriminator(self.model, batch, self.cls_opt)
        terms = train_step_generator(self.model, batch, self.gen_opt, self.cfg, self.dropout_gen)
        if not all(v is None or math.isfinite(_to_float(v)) for v in
                   (terms["l_dec"], terms["l_d"], terms["l_melenc"], terms["l_g"])):
            self._dump(batch, terms)
        record = LossBreakdown(self.step, _to_float(terms["l_dec"]), _to_float(terms["l_d"]),
                               _to_float(terms["l_melenc"]), _to_float(terms["l_g"]), lr)
        self.history.append(record)
        self.step += 1
        return record

    def checkpoint_meta(self) -> dict:
        meta = dict(self.meta)
        meta["train_config"] = self.cfg.to_dict()
        meta["optimizer"] = {"name": "adam", "betas": [self.cfg.adam_beta1, self.cfg.adam_beta2],
                             "eps": self.cfg.adam_eps}
        return meta

    def save(self) -> Path | None:
        if self.out_dir is None:
            return None
        path = save_checkpoint(self.out_dir / f"ckpt_{self.step:07d}.npz", self.model, self.step,
                               self.checkpoint_meta())
        save_checkpoint(self.out_dir / "latest.npz", self.model, self.step, self.checkpoint_meta())
        self.checkpoints.append(path)
        return path

    def run(self, steps: int | None = None) -> TrainResult:
        steps = self.cfg.max_steps if steps is None else steps
        writer = None
        fh = None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            log_path = self.out_dir / "loss_log.csv"
            fresh = not log_path.exists() or self.step == 0
            fh = open(log_path, "w" if fresh else "a", newline="")
            writer = csv.writer(fh)
            if fresh:
                writer.writerow(LOG_COLUMNS)
        try:
            for _ in range(steps):
                record = self.run_step()
                if writer is not None:
                    writer.writerow(record.row())
                if self.step % self.cfg.checkpoint_interval == 0:
                    log.info("step %d l_dec=%.4f l_g=%.4f", record.step, record.l_dec, record.l_g)
                    if fh is not None:
                        fh.flush()
                    self.save()
            if self.out_dir is not None and (not self.checkpoints or self.step % self.cfg.checkpoint_interval):
                self.save()
        finally:
            if fh is not None:
                fh.close()
        return TrainResult(self.model, self.history, self.checkpoints)


def train(model_cfg: ModelConfig, cfg: TrainConfig, corpus: list[UtteranceFeatures],
          out_dir: str | os.PathLike | None = None, meta: dict | None = None) -> TrainResult:
    model = build_model(model_cfg, cfg.seed)
    return Trainer(model, cfg, corpus, out_dir, meta).run()
