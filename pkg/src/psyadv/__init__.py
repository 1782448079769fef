"""Psychoacoustically constrained adversarial audio.

Masking thresholds, phase-preserving equalization, Griffin-Lim
reconstruction and an iterative targeted attack against any model that
exposes ``classify``, ``loss`` and ``grad`` on raw audio.
"""

from .attack import (AttackConfig, AttackOutcome, fgsm_step, run_attack, snr_db,
                     threshold_violation_count)
from .audio_io import AudioBuffer, build_keyword_dataset, read_wav, synth_tone, write_wav
from .oracle import GradientOracle, ToyKeywordModel, train_toy
from .projection import equalize, hard_clip, harmonic_distortion
from .psychoacoustic import MaskingThresholds, ath_db, generate_thresholds, hz_to_bark
from .spectral import Spectrogram, StftConfig, griffin_lim, istft, magnitude, stft

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AttackOutcome", "AudioBuffer", "GradientOracle", "MaskingThresholds",
    "Spectrogram", "StftConfig", "ToyKeywordModel", "ath_db", "build_keyword_dataset",
    "equalize", "fgsm_step", "generate_thresholds", "griffin_lim", "hard_clip",
    "harmonic_distortion", "hz_to_bark", "istft", "magnitude", "read_wav", "run_attack",
    "snr_db", "stft", "synth_tone", "threshold_violation_count", "train_toy", "write_wav",
]
