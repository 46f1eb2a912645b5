"""Phonetic posteriorgram containers and providers.

The real extractor (a singing ASR model) is out of scope; PPGs arrive either
from an external archive or from a synthetic phone track.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ROW_SUM_TOL = 1e-5
RENORM_TOL = 1e-3
ACTIVE_MASS = 0.85
NEIGHBOR_OFFSETS = (1, 2, 3)


class PPGError(ValueError):
    pass


@dataclass(frozen=True)
class PPGSequence:
    probs: np.ndarray  # T x P, float32

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float32)
        if probs.ndim != 2 or probs.shape[0] == 0:
            raise PPGError(f"PPG must be a non-empty T x P matrix, got {probs.shape}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise PPGError("PPG entries must be finite and non-negative")
        sums = probs.astype(np.float64).sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
            raise PPGError(f"PPG rows must sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.2e})")
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return self.probs.shape[1]

    def __len__(self):
        return self.probs.shape[0]

    def truncate(self, length: int) -> "PPGSequence":
        return PPGSequence(self.probs[:length])


def _renormalize(probs: np.ndarray) -> np.ndarray:
    probs = probs.astype(np.float64)
    return (probs / probs.sum(axis=1, keepdims=True)).astype(np.float32)


def make_synthetic_ppg(phone_track: Iterable[tuple[int, int]], ppg_dim: int = 64) -> PPGSequence:
    """Piecewise-constant posteriors: 0.85 on the active class, 0.05 on each of
    the next three classes (cyclically)."""
    rows = []
    for class_id, count in phone_track:
        if not 0 <= class_id < ppg_dim:
            raise PPGError(f"class id {class_id} out of range for {ppg_dim} classes")
        if count < 0:
            raise PPGError("frame counts must be non-negative")
        row = np.zeros(ppg_dim, dtype=np.float64)
        spread = (1.0 - ACTIVE_MASS) / len(NEIGHBOR_OFFSETS)
        for offset in NEIGHBOR_OFFSETS:
            row[(class_id + offset) % ppg_dim] += spread
        row[class_id] += ACTIVE_MASS
        rows.extend([row] * count)
    if not rows:
        raise PPGError("phone track has no frames")
    return PPGSequence(_renormalize(np.stack(rows)))


def validate_ppg(probs: np.ndarray, ppg_dim: int | None = None) -> PPGSequence:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise PPGError(f"PPG array must be 2-D, got shape {probs.shape}")
    if ppg_dim is not None and probs.shape[1] != ppg_dim:
        raise PPGError(f"PPG dimension mismatch: expected {ppg_dim}, got {probs.shape[1]}")
    sums = probs.sum(axis=1)
    worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
    if worst > RENORM_TOL:
        raise PPGError(f"PPG row sums deviate from 1 by {worst:.3g} (> {RENORM_TOL})")
    return PPGSequence(_renormalize(probs))


def load_external_ppg(path: str | os.PathLike, ppg_dim: int | None = None) -> PPGSequence:
    """Load an ``.npz`` archive holding a T x P float array named ``ppg``."""
    with np.load(os.fspath(path)) as archive:
        if "ppg" not in archive:
            raise PPGError(f"{path} has no array named 'ppg'")
        probs = archive["ppg"]
    return validate_ppg(probs, ppg_dim)


def resample_ppg(ppg: PPGSequence, length: int) -> PPGSequence:
    """Linear interpolation in probability space onto ``length`` frames."""
    if length == len(ppg):
        return ppg
    src = np.linspace(0.0, 1.0, len(ppg))
    dst = np.linspace(0.0, 1.0, length)
    probs = np.stack([np.interp(dst, src, col) for col in ppg.probs.astype(np.float64).T], axis=1)
    return PPGSequence(_renormalize(probs))


def read_phone_track(path: str | os.PathLike) -> list[tuple[int, int]]:
    """Parse a ``<class-id> <n_frames>`` per line sidecar file."""
    track = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise PPGError(f"{path}:{lineno}: expected '<class> <frames>'")
            track.append((int(parts[0]), int(parts[1])))
    return track


def write_phone_track(path: str | os.PathLike, track: Sequence[tuple[int, int]]) -> None:
    with open(path, "w") as fh:
        for class_id, count in track:
            fh.write(f"{class_id} {count}\n")
