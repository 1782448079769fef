"""Perturbation constraints: phase-preserving equalization and hard clipping."""

from __future__ import annotations

import numpy as np
from scipy import signal

from .audio_io import AudioBuffer, as_samples
from .psychoacoustic import MaskingThresholds
from .spectral import Spectrogram

VIOLATING_ONLY = "violating_only"
ALL_BINS = "all_bins"


def equalize(delta_spec: Spectrogram, thresholds: MaskingThresholds,
             mode: str = VIOLATING_ONLY) -> Spectrogram:
    """Rescale spectrogram bins to the masking thresholds, keeping each bin's phase.

    ``violating_only`` touches only bins whose magnitude exceeds the
    threshold; ``all_bins`` sets every nonzero bin to exactly the threshold.
    Zero bins stay zero.
    """
    levels = thresholds.levels if isinstance(thresholds, MaskingThresholds) else np.asarray(thresholds)
    d = delta_spec.bins
    if d.shape != levels.shape:
        raise ValueError(f"spectrogram shape {d.shape} != thresholds shape {levels.shape}")
    mag = np.abs(d)
    if mode == VIOLATING_ONLY:
        sel = mag > levels
    elif mode == ALL_BINS:
        sel = mag > 0
    else:
        raise ValueError(f"unknown equalization mode {mode!r}")
    out = d.copy()
    out[sel] = levels[sel] * (d[sel] / mag[sel])
    # the complex division can overshoot the ceiling by an ulp
    over = np.abs(out) > levels
    if np.any(over):
        out[over] *= np.nextafter(levels[over] / np.abs(out[over]), 0)
    return delta_spec.with_bins(out)


def hard_clip(delta, beta: float) -> AudioBuffer:
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    x = as_samples(delta)
    rate = delta.sample_rate if isinstance(delta, AudioBuffer) else 16000
    return AudioBuffer(np.clip(x, -beta, beta), rate)


def harmonic_distortion(buffer: AudioBuffer, fundamental: float, n_harmonics: int = 5) -> float:
    """Power in harmonics 2..5 relative to the fundamental, in dB.

    Both are measured on a Hann-windowed DFT of the whole buffer, summing
    the bin nearest each harmonic and its two neighbours. Returns ``-inf``
    for a silent buffer.
    """
    x = as_samples(buffer)
    sr = buffer.sample_rate
    if fundamental <= 0 or fundamental * n_harmonics >= sr / 2:
        raise ValueError(f"fundamental {fundamental} Hz must lie below Nyquist/{n_harmonics}")
    n = x.size
    if n * fundamental / sr < 4:
        raise ValueError("buffer too short to resolve the fundamental")
    power = np.abs(np.fft.rfft(x * signal.get_window("hann", n))) ** 2
    df = sr / n

    def band(f):
        k = int(round(f / df))
        return power[max(0, k - 1):k + 2].sum()

    fund = band(fundamental)
    harm = sum(band(h * fundamental) for h in range(2, n_harmonics + 1))
    if fund == 0.0 or harm == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(harm / fund))
