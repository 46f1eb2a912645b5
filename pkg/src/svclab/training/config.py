from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

ABLATIONS = ("base3", "me", "me_sc", "full")


@dataclass
class TrainConfig:
    gamma: float = 1.0
    lam: float = 0.1
    batch_size: int = 8
    lr_init: float = 1e-3
    lr_halving_period: int = 2000
    max_steps: int = 5000
    seed: int = 0
    mel_encoder: bool = True
    confusion: bool = True
    mel_regressor: bool = True
    d_steps_per_g: int = 1
    double_mel_loss: bool = True
    checkpoint_interval: int = 1000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 1.0

    def __post_init__(self):
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("gamma and lambda must be non-negative")
        for name in ("batch_size", "lr_halving_period", "checkpoint_interval", "d_steps_per_g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"TrainConfig.{name} must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if (self.confusion or self.mel_regressor) and not self.mel_encoder:
            raise ValueError("the confusion and mel-regressor modules require the Mel encoder")

    def lr_at(self, step: int) -> float:
        return self.lr_init * 0.5 ** (step // self.lr_halving_period)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        """Batch 32, 200k steps, learning rate halved every 25k steps."""
        return cls(**{"batch_size": 32, "max_steps": 200_000, "lr_halving_period": 25_000, **overrides})


def with_ablation(cfg: TrainConfig, name: str) -> TrainConfig:
    """Apply one row of the accumulated ablation: base3, +ME, +SC, +MS."""
    if name == "base3":
        return replace(cfg, mel_encoder=False, confusion=False, mel_regressor=False, gamma=0.0, lam=0.0)
    if name == "me":
        return replace(cfg, mel_encoder=True, confusion=False, mel_regressor=False, gamma=0.0, lam=0.0)
    if name == "me_sc":
        return replace(cfg, mel_encoder=True, confusion=True, mel_regressor=False, gamma=0.0)
    if name == "full":
        return replace(cfg, mel_encoder=True, confusion=True, mel_regressor=True)
    raise ValueError(f"unknown ablation {name!r}; choose from {', '.join(ABLATIONS)}")


def ablation_grid(cfg: TrainConfig) -> list[TrainConfig]:
    return [with_ablation(cfg, name) for name in ABLATIONS]
