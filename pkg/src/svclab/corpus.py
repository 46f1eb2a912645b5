"""Corpus preparation: ``<singer>/<utt>.wav`` trees -> feature archives + manifest."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .config import FeatureConfig, config_hash
from .features import (AudioClip, FeatureError, PPGSequence, UtteranceFeatures, align_features,
                       compute_mel, extract_f0, load_audio, load_external_ppg, make_synthetic_ppg,
                       read_features, resample_ppg, write_features)
from .features.ppg import read_phone_track
from .features.utterance import MAX_FRAME_SKEW, read_meta

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class CorpusError(ValueError):
    pass


def sha1_of(path: Path) -> str:
    h = hashlib.sha1()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def find_ppg(wav: Path, cfg: FeatureConfig, n_frames: int) -> PPGSequence:
    """Sidecar lookup: ``<utt>.ppg.npz`` (external extractor) or ``<utt>.phones`` (phone track)."""
    external = wav.with_suffix(".ppg.npz")
    phones = wav.with_suffix(".phones")
    if external.exists():
        ppg = load_external_ppg(external, cfg.ppg_dim)
        if abs(len(ppg) - n_frames) > MAX_FRAME_SKEW:
            ppg = resample_ppg(ppg, n_frames)
        return ppg
    if phones.exists():
        return make_synthetic_ppg(read_phone_track(phones), cfg.ppg_dim)
    raise FeatureError(f"no PPG sidecar for {wav} (expected {external.name} or {phones.name})")


def extract_utterance(clip: AudioClip, ppg: PPGSequence, singer: int, cfg: FeatureConfig) -> UtteranceFeatures:
    if clip.duration < cfg.min_duration:
        raise FeatureError(f"utterance of {clip.duration:.3f} s is shorter than {cfg.min_duration} s")
    mel = compute_mel(clip, cfg.mel())
    f0 = extract_f0(clip, cfg.f0())
    return align_features(ppg, f0, mel, singer, clip.sample_rate)


def features_from_wav(wav: str | os.PathLike, singer: int, cfg: FeatureConfig,
                      ppg_path: str | os.PathLike | None = None) -> tuple[UtteranceFeatures, AudioClip]:
    wav = Path(wav)
    clip = load_audio(wav, cfg.sample_rate)
    frames = -(-len(clip) // cfg.hop)
    if ppg_path is not None:
        ppg = load_external_ppg(ppg_path, cfg.ppg_dim)
        if abs(len(ppg) - frames) > MAX_FRAME_SKEW:
            ppg = resample_ppg(ppg, frames)
    else:
        ppg = find_ppg(wav, cfg, frames)
    return extract_utterance(clip, ppg, singer, cfg), clip


@dataclass
class PrepareReport:
    written: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)
    singers: dict[str, int] = field(default_factory=dict)


def scan_corpus(corpus_dir: Path) -> list[tuple[str, Path]]:
    if not corpus_dir.is_dir():
        raise CorpusError(f"corpus directory {corpus_dir} does not exist")
    entries = []
    for singer_dir in sorted(p for p in corpus_dir.iterdir() if p.is_dir()):
        for wav in sorted(singer_dir.glob("*.wav")):
            entries.append((singer_dir.name, wav))
    if not entries:
        raise CorpusError(f"no <singer>/<utt>.wav files under {corpus_dir}")
    return entries


def prepare_corpus(corpus_dir: str | os.PathLike, out_dir: str | os.PathLike, cfg: FeatureConfig) -> PrepareReport:
    corpus_dir, out_dir = Path(corpus_dir), Path(out_dir)
    entries = scan_corpus(corpus_dir)
    digest = config_hash(cfg)
    report = PrepareReport(singers={name: i for i, name in enumerate(sorted({s for s, _ in entries}))})
    utterances = []
    for singer, wav in entries:
        key = f"{singer}/{wav.stem}"
        target = out_dir / singer / wav.stem
        try:
            source = sha1_of(wav)
            for sidecar in (wav.with_suffix(".ppg.npz"), wav.with_suffix(".phones")):
                if sidecar.exists():
                    source += ":" + sha1_of(sidecar)
            meta = None
            if (target / "meta.json").exists():
                try:
                    meta = read_meta(target)
                except FeatureError:
                    meta = None
            if (meta is not None and meta.get("source_digest") == source and meta.get("config_hash") == digest
                    and meta.get("singer_id") == report.singers[singer]):
                report.skipped.append(key)
                frames = int(meta["frames"])
            else:
                utt, _ = features_from_wav(wav, report.singers[singer], cfg)
                write_features(utt, target, {"source_digest": source, "config_hash": digest,
                                             "singer": singer, "utterance": wav.stem})
                report.written.append(key)
                frames = utt.frames
            utterances.append({"singer": singer, "name": wav.stem, "features": f"{singer}/{wav.stem}",
                               "wav": str(wav), "frames": frames})
        except Exception as exc:  # keep going; failures are reported per file
            log.error("failed to prepare %s: %s", wav, exc)
            report.failed[str(wav)] = f"{type(exc).__name__}: {exc}"
    manifest = {
        "config_hash": digest,
        "feature_config": vars(cfg),
        "singers": report.singers,
        "utterances": utterances,
        "failures": report.failed,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return report


def load_manifest(features_dir: str | os.PathLike) -> dict:
    path = Path(features_dir) / MANIFEST
    if not path.exists():
        raise CorpusError(f"no {MANIFEST} in {features_dir}; run 'prepare' first")
    return json.loads(path.read_text())


def load_prepared(features_dir: str | os.PathLike, ppg_dim: int | None = None) -> tuple[list[UtteranceFeatures], dict]:
    manifest = load_manifest(features_dir)
    corpus = [read_features(Path(features_dir) / u["features"], ppg_dim) for u in manifest["utterances"]]
    if not corpus:
        raise CorpusError(f"manifest in {features_dir} lists no utterances")
    return corpus, manifest
