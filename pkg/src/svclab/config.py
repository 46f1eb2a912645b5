"""Run configuration: TOML file + CLI overrides, and the config hash stamped on artifacts."""
from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

from .features import F0Config, MelConfig
from .model import ModelConfig
from .training import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SEED_ENV = "SVCLAB_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class FeatureConfig:
    sample_rate: int = 24000
    n_mels: int = 80
    hop: int = 300
    win: int = 1200
    f0_min: float = 65.0
    f0_max: float = 1000.0
    voicing_threshold: float = 0.3
    ppg_dim: int = 64
    min_duration: float = 0.5

    def mel(self) -> MelConfig:
        return MelConfig(sample_rate=self.sample_rate, n_mels=self.n_mels, hop=self.hop, win=self.win)

    def f0(self) -> F0Config:
        return F0Config(sample_rate=self.sample_rate, hop=self.hop, win=self.win, f0_min=self.f0_min,
                        f0_max=self.f0_max, voicing_threshold=self.voicing_threshold)


@dataclass
class Paths:
    corpus_dir: str = "corpus"
    features_dir: str = "features"
    checkpoint_dir: str = "checkpoints"
    output_dir: str = "outputs"


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def validate(self):
        dirs = [os.path.abspath(p) for p in asdict(self.paths).values()]
        if len(set(dirs)) != len(dirs):
            raise ConfigError("corpus, features, checkpoint and output directories must be distinct")
        if self.model.ppg_dim != self.features.ppg_dim:
            raise ConfigError(f"model.ppg_dim={self.model.ppg_dim} disagrees with "
                              f"features.ppg_dim={self.features.ppg_dim}")
        if self.model.n_mels != self.features.n_mels:
            raise ConfigError("model.n_mels disagrees with features.n_mels")


def _build(cls, section: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}] section: {exc}") from exc


def load_config(path: str | os.PathLike | None = None, seed: int | None = None) -> RunConfig:
    """Precedence: explicit ``seed`` flag > file > ``SVCLAB_SEED`` > 0."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    top = set(data) - {"paths", "features", "model", "train", "seed"}
    if top:
        raise ConfigError(f"unknown top-level keys: {sorted(top)}")
    feats = _build(FeatureConfig, data.get("features", {}), "features")
    model_section = dict(data.get("model", {}))
    model_section.setdefault("ppg_dim", feats.ppg_dim)
    model_section.setdefault("n_mels", feats.n_mels)
    try:
        model = ModelConfig.from_dict(model_section)
        train = TrainConfig.from_dict(data.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(
        paths=_build(Paths, data.get("paths", {}), "paths"),
        features=feats,
        model=model,
        train=train,
    )
    if seed is not None:
        cfg.seed = int(seed)
    elif "seed" in data:
        cfg.seed = int(data["seed"])
    elif os.environ.get(SEED_ENV):
        try:
            cfg.seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    cfg.train.seed = cfg.seed
    cfg.validate()
    return cfg


def config_hash(*sections) -> str:
    """Stable short digest of dataclass/dict sections."""
    payload = []
    for s in sections:
        if hasattr(s, "to_dict"):
            payload.append(s.to_dict())
        elif hasattr(s, "__dataclass_fields__"):
            payload.append(asdict(s))
        else:
            payload.append(s)
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def feature_hash(cfg: RunConfig) -> str:
    return config_hash(cfg.features)


def run_hash(cfg: RunConfig) -> str:
    return config_hash(cfg.features, cfg.model, cfg.train, {"seed": cfg.seed})

