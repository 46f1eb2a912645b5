"""Frame-aligned training example and its on-disk archive format."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mel import MelSpectrogram
from .pitch import F0Contour
from .ppg import PPGSequence

MAX_FRAME_SKEW = 2
ARCHIVE_ARRAYS = ("ppg", "logf0", "voicing", "mel")


class FeatureError(ValueError):
    pass


def stop_targets_for(length: int) -> np.ndarray:
    stop = np.zeros(length, dtype=np.float32)
    stop[-1] = 1.0
    return stop


@dataclass(frozen=True)
class UtteranceFeatures:
    ppg: PPGSequence
    f0: F0Contour
    mel: MelSpectrogram
    singer: int
    stop_targets: np.ndarray = field(default=None)
    sample_rate: int = 24000

    def __post_init__(self):
        lengths = {len(self.ppg), len(self.f0), len(self.mel)}
        if len(lengths) != 1:
            raise FeatureError(f"streams disagree on frame count: {sorted(lengths)}")
        if self.stop_targets is None:
            object.__setattr__(self, "stop_targets", stop_targets_for(len(self.mel)))
        stop = np.asarray(self.stop_targets, dtype=np.float32)
        if stop.shape != (len(self.mel),) or stop[-1] != 1 or np.any(np.diff(stop) < 0):
            raise FeatureError("stop targets must be monotone with a final 1")
        object.__setattr__(self, "stop_targets", stop)
        if self.singer < 0:
            raise FeatureError(f"invalid singer id {self.singer}")

    @property
    def frames(self) -> int:
        return len(self.mel)


def align_features(ppg: PPGSequence, f0: F0Contour, mel: MelSpectrogram, singer: int,
                   sample_rate: int = 24000) -> UtteranceFeatures:
    """Trim all streams to the shortest; extraction edge effects may differ by 2 frames."""
    lengths = (len(ppg), len(f0), len(mel))
    if max(lengths) - min(lengths) > MAX_FRAME_SKEW:
        raise FeatureError(f"frame counts {lengths} differ by more than {MAX_FRAME_SKEW}")
    n = min(lengths)
    if n == 0:
        raise FeatureError("empty utterance")
    return UtteranceFeatures(
        ppg=ppg.truncate(n),
        f0=f0.truncate(n),
        mel=MelSpectrogram(mel.frames[:n], mel.hop_samples, mel.win_samples),
        singer=singer,
        sample_rate=sample_rate,
    )


def _write_f32(path: Path, array: np.ndarray) -> None:
    np.ascontiguousarray(array, dtype="<f4").tofile(path)


def _read_f32(path: Path, count: int) -> np.ndarray:
    if not path.exists():
        raise FeatureError(f"missing array file {path.name} in {path.parent}")
    data = np.fromfile(path, dtype="<f4")
    if data.size != count:
        raise FeatureError(f"{path.name}: expected {count} values, found {data.size}")
    return data.astype(np.float32)


def write_features(utt: UtteranceFeatures, directory: str | os.PathLike, extra_meta: dict | None = None) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    _write_f32(out / "ppg.f32", utt.ppg.probs)
    _write_f32(out / "logf0.f32", utt.f0.log_f0)
    _write_f32(out / "voicing.f32", utt.f0.voicing)
    _write_f32(out / "mel.f32", utt.mel.frames)
    meta = {
        "frames": utt.frames,
        "n_mels": utt.mel.n_mels,
        "ppg_dim": utt.ppg.dim,
        "singer_id": int(utt.singer),
        "sample_rate": utt.sample_rate,
        "hop": utt.mel.hop_samples,
        "win": utt.mel.win_samples,
    }
    meta.update(extra_meta or {})
    # meta last: its presence marks a complete archive
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_meta(directory: str | os.PathLike) -> dict:
    path = Path(directory) / "meta.json"
    if not path.exists():
        raise FeatureError(f"{directory} has no meta.json")
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FeatureError(f"corrupt meta.json in {directory}: {exc}") from exc
    for key in ("frames", "n_mels", "ppg_dim", "singer_id", "sample_rate", "hop"):
        if key not in meta:
            raise FeatureError(f"meta.json in {directory} lacks '{key}'")
    return meta


def read_features(directory: str | os.PathLike, ppg_dim: int | None = None,
                  n_mels: int | None = None) -> UtteranceFeatures:
    src = Path(directory)
    meta = read_meta(src)
    frames, mels, dim = int(meta["frames"]), int(meta["n_mels"]), int(meta["ppg_dim"])
    if ppg_dim is not None and dim != ppg_dim:
        raise FeatureError(f"{src}: PPG dimension mismatch, expected P={ppg_dim}, archive has P={dim}")
    if n_mels is not None and mels != n_mels:
        raise FeatureError(f"{src}: expected {n_mels} mel bands, archive has {mels}")
    ppg = _read_f32(src / "ppg.f32", frames * dim).reshape(frames, dim)
    log_f0 = _read_f32(src / "logf0.f32", frames)
    voicing = _read_f32(src / "voicing.f32", frames)
    mel = _read_f32(src / "mel.f32", frames * mels).reshape(frames, mels)
    return UtteranceFeatures(
        ppg=PPGSequence(ppg),
        f0=F0Contour(log_f0, voicing),
        mel=MelSpectrogram(mel, int(meta["hop"]), int(meta.get("win", 4 * int(meta["hop"])))),
        singer=int(meta["singer_id"]),
        sample_rate=int(meta["sample_rate"]),
    )
