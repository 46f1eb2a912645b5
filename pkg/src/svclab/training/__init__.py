"""Losses, the adversarial training cycle and ablation configurations."""
from .config import ABLATIONS, TrainConfig, ablation_grid, with_ablation
from .losses import loss_d, loss_dec, loss_g, loss_melenc
from .trainer import (LossBreakdown, Trainer, TrainingDiverged, TrainResult, build_model,
                      generator_losses, make_optimizers, train, train_step_discriminator,
                      train_step_generator)

__all__ = [
    "ABLATIONS", "TrainConfig", "ablation_grid", "with_ablation",
    "loss_d", "loss_dec", "loss_g", "loss_melenc",
    "LossBreakdown", "Trainer", "TrainingDiverged", "TrainResult", "build_model",
    "generator_losses", "make_optimizers", "train", "train_step_discriminator",
    "train_step_generator",
]
