from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    Defaults are the full-size network; tests and toy corpora shrink the
    widths but keep the same topology.
    """

    ppg_dim: int = 64
    n_mels: int = 80
    mel_code_dim: int = 4
    singer_count: int = 16
    singer_emb_dim: int = 64
    enc_dim: int = 256
    dec_dim: int = 512
    gmm_mixtures: int = 5
    reduction_factor: int = 2
    classifier_channels: int = 256
    regressor_width: int = 256
    prenet_dim: int = 256
    prenet_dropout: float = 0.5
    cbhg_bank_size: int = 8
    cbhg_bank_channels: int = 128
    highway_layers: int = 4
    mel_enc_channels: tuple[int, ...] = (32, 32, 64, 64, 128, 128)
    mel_enc_gru_dim: int = 64
    postnet_channels: int = 512
    postnet_kernel: int = 5
    postnet_layers: int = 5
    f0_normalize: bool = False
    f0_mean: float = 0.0
    f0_std: float = 1.0

    def __post_init__(self):
        self.mel_enc_channels = tuple(int(c) for c in self.mel_enc_channels)
        ints = [f.name for f in fields(self) if f.type in ("int", int)]
        for name in ints:
            if getattr(self, name) <= 0:
                raise ValueError(f"ModelConfig.{name} must be positive")
        if not self.mel_enc_channels or min(self.mel_enc_channels) <= 0:
            raise ValueError("mel_enc_channels must be non-empty and positive")
        if not 0.0 <= self.prenet_dropout < 1.0:
            raise ValueError("prenet_dropout must lie in [0, 1)")
        if self.f0_std <= 0:
            raise ValueError("f0_std must be positive")

    @property
    def conditioning_dim(self) -> int:
        return self.enc_dim + self.mel_code_dim + self.singer_emb_dim + 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mel_enc_channels"] = list(self.mel_enc_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ModelConfig fields: {sorted(unknown)}")
        return cls(**d)


def micro_config(**overrides) -> ModelConfig:
    """Tiny network used for finite-difference checks."""
    base = dict(
        ppg_dim=8, n_mels=4, singer_count=2, singer_emb_dim=4, enc_dim=8, dec_dim=8,
        gmm_mixtures=2, classifier_channels=8, regressor_width=8, prenet_dim=8,
        cbhg_bank_size=3, cbhg_bank_channels=4, highway_layers=2,
        mel_enc_channels=(2, 2, 2, 2, 2, 2), mel_enc_gru_dim=4, postnet_channels=8,
    )
    base.update(overrides)
    return ModelConfig(**base)


def desk_config(**overrides) -> ModelConfig:
    """Narrow network for single-CPU training runs on toy corpora."""
    base = dict(
        ppg_dim=64, n_mels=80, singer_count=4, singer_emb_dim=16, enc_dim=64, dec_dim=128,
        classifier_channels=64, regressor_width=64, prenet_dim=64, cbhg_bank_channels=32,
        highway_layers=4, mel_enc_channels=(4, 4, 8, 8, 16, 16), mel_enc_gru_dim=32,
        postnet_channels=64,
    )
    base.update(overrides)
    return ModelConfig(**base)
