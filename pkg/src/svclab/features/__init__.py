"""Audio loading, feature extraction, alignment and archives."""
from .audio import AudioClip, AudioError, add_white_noise, load_audio, save_audio
from .mel import LOG_FLOOR, MelConfig, MelSpectrogram, compute_mel
from .pitch import F0Config, F0Contour, extract_f0
from .ppg import (PPGError, PPGSequence, load_external_ppg, make_synthetic_ppg,
                  resample_ppg, validate_ppg)
from .utterance import (FeatureError, UtteranceFeatures, align_features, read_features,
                        write_features)
from .vocoder import griffin_lim

__all__ = [
    "AudioClip", "AudioError", "add_white_noise", "load_audio", "save_audio",
    "LOG_FLOOR", "MelConfig", "MelSpectrogram", "compute_mel",
    "F0Config", "F0Contour", "extract_f0",
    "PPGError", "PPGSequence", "load_external_ppg", "make_synthetic_ppg", "resample_ppg",
    "validate_ppg",
    "FeatureError", "UtteranceFeatures", "align_features", "read_features", "write_features",
    "griffin_lim",
]
