"""Command-line entry point.

Exit codes: 0 success, 1 partial data failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, FeatureConfig, RunConfig, feature_hash, load_config, run_hash
from .corpus import CorpusError, features_from_wav, load_manifest, load_prepared, prepare_corpus
from .evaluation import (MetricError, ProbeConfig, disentanglement_probe, ncc, noise_robustness_sweep,
                         parse_levels, snr_estimate, snr_with_reference, sweep_csv)
from .features import AudioError, FeatureError, PPGError, extract_f0, griffin_lim, load_audio, save_audio
from .model import CheckpointError, convert, load_checkpoint
from .training import ABLATIONS, Trainer, build_model, with_ablation

log = logging.getLogger("svclab")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(record: dict, out: str | None):
    text = json.dumps(record, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out).write_text(text + "\n")


def _singers_from(meta: dict) -> dict[str, int]:
    singers = meta.get("singers")
    if not singers:
        raise UsageError("checkpoint carries no singer map")
    return singers


def _target_id(singers: dict[str, int], name: str) -> int:
    if name not in singers:
        raise UsageError(f"unknown singer {name!r}; known singers: {', '.join(sorted(singers))}")
    return singers[name]


def _feature_cfg(meta: dict, fallback: RunConfig):
    stored = meta.get("feature_config")
    return FeatureConfig(**stored) if stored else fallback.features


# -- commands ---------------------------------------------------------------

def cmd_prepare(args) -> int:
    cfg = load_config(args.config, args.seed)
    corpus = args.corpus or cfg.paths.corpus_dir
    out = args.out or cfg.paths.features_dir
    try:
        report = prepare_corpus(corpus, out, cfg.features)
    except CorpusError as exc:
        raise UsageError(str(exc)) from exc
    print(f"singers: {len(report.singers)}  written: {len(report.written)}  "
          f"skipped: {len(report.skipped)}  failed: {len(report.failed)}")
    for path, reason in report.failed.items():
        print(f"FAILED {path}: {reason}", file=sys.stderr)
    return EXIT_PARTIAL if report.failed else EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed)
    features_dir = Path(args.features or cfg.paths.features_dir)
    out_dir = Path(args.out or cfg.paths.checkpoint_dir)
    train_cfg = cfg.train
    if args.ablation:
        train_cfg = with_ablation(train_cfg, args.ablation)
    if args.steps is not None:
        train_cfg = replace(train_cfg, max_steps=args.steps)
    try:
        corpus, manifest = load_prepared(features_dir, cfg.model.ppg_dim)
    except (CorpusError, FeatureError) as exc:
        raise UsageError(str(exc)) from exc
    if manifest["config_hash"] != feature_hash(cfg):
        raise UsageError(f"features in {features_dir} were prepared with config {manifest['config_hash']}, "
                         f"current config is {feature_hash(cfg)}")
    model_cfg = replace(cfg.model, singer_count=len(manifest["singers"]))
    cfg.model = model_cfg
    cfg.train = train_cfg
    meta = {
        "singers": manifest["singers"],
        "config_hash": run_hash(cfg),
        "feature_config": vars(cfg.features),
        "ablation": args.ablation or "custom",
        "seed": cfg.seed,
    }
    model = build_model(model_cfg, train_cfg.seed)
    result = Trainer(model, train_cfg, corpus, out_dir, meta).run()
    last = result.history[-1] if result.history else None
    print(f"trained {len(result.history)} steps; final l_dec="
          f"{last.l_dec if last else float('nan'):.4f}; checkpoint {result.checkpoints[-1]}")
    return EXIT_OK


def _load_ckpt(path):
    try:
        return load_checkpoint(path)
    except (CheckpointError, FileNotFoundError) as exc:
        raise UsageError(f"cannot load checkpoint {path}: {exc}") from exc


def _uses_mel_encoder(meta: dict) -> bool:
    return bool(meta.get("train_config", {}).get("mel_encoder", True))


def cmd_convert(args) -> int:
    cfg = load_config(args.config, args.seed)
    ckpt = _load_ckpt(args.ckpt)
    target = _target_id(_singers_from(ckpt.meta), args.target_singer)
    feats = _feature_cfg(ckpt.meta, cfg)
    try:
        source, _ = features_from_wav(args.src, target, feats, args.ppg)
    except (AudioError, FeatureError, PPGError, FileNotFoundError) as exc:
        raise UsageError(f"cannot read source {args.src}: {exc}") from exc
    mel, out = convert(ckpt.model, source, target, seed=cfg.seed, use_mel_encoder=_uses_mel_encoder(ckpt.meta))
    if out.max_steps_reached:
        print(f"warning: decoder hit max_steps ({out.steps}) without a stop token; output is partial",
              file=sys.stderr)
    audio = griffin_lim(mel, args.gl_iters, feats.mel(), seed=cfg.seed)
    out_wav = Path(args.out)
    out_wav.parent.mkdir(parents=True, exist_ok=True)
    save_audio(out_wav, audio)
    mel_path = out_wav.with_suffix(".mel.f32")
    np.ascontiguousarray(mel.frames, dtype="<f4").tofile(mel_path)
    print(f"frames: {len(mel)}")
    print(f"decode_steps: {out.steps}")
    print(f"wrote {out_wav} and {mel_path}")
    return EXIT_OK


def _contour(path, feats):
    try:
        return extract_f0(load_audio(path, feats.sample_rate), feats.f0())
    except (AudioError, FileNotFoundError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _clip(path, feats):
    try:
        return load_audio(path, feats.sample_rate)
    except (AudioError, FileNotFoundError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def cmd_eval_ncc(args) -> int:
    cfg = load_config(args.config, args.seed)
    report = ncc(_contour(args.ref, cfg.features), _contour(args.hyp, cfg.features),
                 mean_removal=not args.no_mean_removal)
    _emit({"metric": "ncc", **report.to_dict(), "config_hash": feature_hash(cfg)}, args.out)
    return EXIT_OK


def cmd_eval_snr(args) -> int:
    cfg = load_config(args.config, args.seed)
    if args.signal:
        report = snr_estimate(_clip(args.signal, cfg.features))
    elif args.clean and args.degraded:
        report = snr_with_reference(_clip(args.clean, cfg.features), _clip(args.degraded, cfg.features))
    else:
        raise UsageError("give either --signal, or both --clean and --degraded")
    _emit({"metric": "snr", **report.to_dict(), "config_hash": feature_hash(cfg)}, args.out)
    return EXIT_OK


def cmd_eval_sweep(args) -> int:
    cfg = load_config(args.config, args.seed)
    ckpt = _load_ckpt(args.ckpt)
    target = _target_id(_singers_from(ckpt.meta), args.target_singer)
    feats = _feature_cfg(ckpt.meta, cfg)
    try:
        levels = parse_levels(args.levels)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        source, clip = features_from_wav(args.src, target, feats, args.ppg)
    except (AudioError, FeatureError, PPGError, FileNotFoundError) as exc:
        raise UsageError(f"cannot read source {args.src}: {exc}") from exc
    rows = noise_robustness_sweep(ckpt.model, clip, source.ppg, target, levels, seed=cfg.seed,
                                  mel_cfg=feats.mel(), f0_cfg=feats.f0(), gl_iters=args.gl_iters,
                                  use_mel_encoder=_uses_mel_encoder(ckpt.meta))
    text = sweep_csv(rows)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(f"# config_hash={ckpt.meta.get('config_hash', '')}\n" + text)
    return EXIT_OK


def cmd_eval_probe(args) -> int:
    cfg = load_config(args.config, args.seed)
    try:
        corpus, _ = load_prepared(args.features or cfg.paths.features_dir)
    except (CorpusError, FeatureError) as exc:
        raise UsageError(str(exc)) from exc
    probe_cfg = ProbeConfig(steps=args.steps, test_fraction=args.test_fraction, seed=cfg.seed)
    record = {"metric": "probe", "seed": cfg.seed}
    accs = []
    for label, path in (("a", args.ckpt_a), ("b", args.ckpt_b)):
        if path is None:
            continue
        ckpt = _load_ckpt(path)
        report = disentanglement_probe(ckpt.model, corpus, probe_cfg)
        record[label] = {"checkpoint": str(path), "config_hash": ckpt.meta.get("config_hash"),
                         **report.to_dict()}
        accs.append(report.probe_accuracy)
    if len(accs) == 2:
        record["delta"] = accs[0] - accs[1]
    _emit(record, args.out)
    return EXIT_OK


def cmd_toy_corpus(args) -> int:
    from .synth import write_toy_corpus
    write_toy_corpus(args.out, args.singers, args.utts, args.ppg_dim, args.seed or 0)
    print(f"wrote toy corpus to {args.out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="overrides the config file and SVCLAB_SEED")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="svclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="extract feature archives from a wav corpus")
    p.add_argument("--corpus", help="directory of <singer>/<utt>.wav")
    p.add_argument("--out", help="feature output directory")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="train a conversion model")
    p.add_argument("--ablation", choices=ABLATIONS)
    p.add_argument("--features", help="prepared feature directory")
    p.add_argument("--out", help="checkpoint directory")
    p.add_argument("--steps", type=int, help="override train.max_steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", parents=[common], help="convert a wav to a target singer")
    p.add_argument("--src", required=True)
    p.add_argument("--target-singer", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ppg", help="external PPG archive (default: sidecar next to --src)")
    p.add_argument("--gl-iters", type=int, default=32)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("evaluate", help="objective metrics")
    ev = p.add_subparsers(dest="metric", required=True)
    q = ev.add_parser("ncc", parents=[common])
    q.add_argument("--ref", required=True)
    q.add_argument("--hyp", required=True)
    q.add_argument("--no-mean-removal", action="store_true")
    q.add_argument("--out")
    q.set_defaults(func=cmd_eval_ncc)
    q = ev.add_parser("snr", parents=[common])
    q.add_argument("--clean")
    q.add_argument("--degraded")
    q.add_argument("--signal", help="reference-free estimate on a single file")
    q.add_argument("--out")
    q.set_defaults(func=cmd_eval_snr)
    q = ev.add_parser("sweep", parents=[common])
    q.add_argument("--src", required=True)
    q.add_argument("--target-singer", required=True)
    q.add_argument("--ckpt", required=True)
    q.add_argument("--levels", required=True, help="comma-separated SNRs in dB; 'inf' for clean")
    q.add_argument("--ppg")
    q.add_argument("--gl-iters", type=int, default=32)
    q.add_argument("--out")
    q.set_defaults(func=cmd_eval_sweep)
    q = ev.add_parser("probe", parents=[common])
    q.add_argument("--ckpt-a", required=True)
    q.add_argument("--ckpt-b")
    q.add_argument("--features")
    q.add_argument("--steps", type=int, default=2000)
    q.add_argument("--test-fraction", type=float, default=0.2)
    q.add_argument("--out")
    q.set_defaults(func=cmd_eval_probe)

    p = sub.add_parser("toy-corpus", parents=[common], help="write a synthetic pseudo-song corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--singers", type=int, default=2)
    p.add_argument("--utts", type=int, default=3)
    p.add_argument("--ppg-dim", type=int, default=64)
    p.set_defaults(func=cmd_toy_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
