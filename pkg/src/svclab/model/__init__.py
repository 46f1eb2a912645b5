"""Trainable networks and the conversion path."""
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import ModelConfig, desk_config, micro_config
from .decoder import DecoderOutput
from .svc import CLASSIFIER, GENERATOR, Batch, SVCModel, convert

__all__ = [
    "Checkpoint", "CheckpointError", "load_checkpoint", "save_checkpoint",
    "ModelConfig", "desk_config", "micro_config", "DecoderOutput",
    "CLASSIFIER", "GENERATOR", "Batch", "SVCModel", "convert",
]
