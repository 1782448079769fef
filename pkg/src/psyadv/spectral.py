"""Short-time Fourier transform, its weighted overlap-add inverse and Griffin-Lim."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .audio_io import AudioBuffer, as_samples

_WINDOW_ALIASES = {"hann": "hann", "hanning": "hann", "rect": "boxcar",
                   "rectangular": "boxcar", "boxcar": "boxcar", "hamming": "hamming"}


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters.

    ``center=True`` reflect-pads the signal by ``frame_len // 2`` on both
    sides, so frame ``m`` is centred on sample ``m * hop``. With
    ``center=False`` frame ``m`` covers ``[m * hop, m * hop + frame_len)``
    and the tail is zero-padded to a whole frame.
    """

    frame_len: int = 2048
    hop: int = 512
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        n = self.frame_len
        if n <= 0 or n & (n - 1):
            raise ValueError(f"frame_len must be a power of two, got {n}")
        if not 0 < self.hop <= n:
            raise ValueError(f"hop must lie in (0, frame_len], got {self.hop}")
        if self.window not in _WINDOW_ALIASES:
            raise ValueError(f"unknown window {self.window!r}")
        if not signal.check_COLA(self.taper(), n, n - self.hop, tol=1e-10):
            raise ValueError(f"window {self.window!r} with hop {self.hop} is not COLA")

    def taper(self) -> np.ndarray:
        # periodic (DFT-even) window
        return signal.get_window(_WINDOW_ALIASES[self.window], self.frame_len, fftbins=True)

    @property
    def n_bins(self) -> int:
        return self.frame_len // 2 + 1

    def n_frames(self, length: int) -> int:
        if self.center:
            return 1 + length // self.hop
        return 1 + max(0, -(-(length - self.frame_len) // self.hop))

    def bin_freqs(self, sample_rate: float) -> np.ndarray:
        return np.fft.rfftfreq(self.frame_len, 1.0 / sample_rate)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Complex STFT matrix of shape (frames, bins) plus what is needed to invert it."""

    bins: np.ndarray
    config: StftConfig
    sample_rate: int
    length: int

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.complex128)
        if b.ndim != 2 or b.shape[1] != self.config.n_bins:
            raise ValueError(f"bins shape {b.shape} inconsistent with frame_len "
                             f"{self.config.frame_len}")
        if b.shape[0] != self.config.n_frames(self.length):
            raise ValueError(f"{b.shape[0]} frames inconsistent with length {self.length}")
        if not np.all(np.isfinite(b)):
            raise ValueError("spectrogram entries must be finite")
        object.__setattr__(self, "bins", b)

    @property
    def shape(self):
        return self.bins.shape

    def with_bins(self, bins) -> "Spectrogram":
        return Spectrogram(bins, self.config, self.sample_rate, self.length)


def _padded(x: np.ndarray, config: StftConfig) -> tuple[np.ndarray, int]:
    """Return the framed-domain signal and the offset of sample 0 inside it."""
    n, hop = config.frame_len, config.hop
    m = config.n_frames(len(x))
    total = (m - 1) * hop + n
    if config.center:
        half = n // 2
        x = np.pad(x, half, mode="reflect") if len(x) > 1 else np.pad(x, half)
        offset = half
    else:
        offset = 0
    return np.pad(x, (0, max(0, total - len(x))))[:total], offset


def stft(buffer, config: StftConfig = StftConfig(), sample_rate: int | None = None) -> Spectrogram:
    x = as_samples(buffer)
    if x.size == 0:
        raise ValueError("cannot transform an empty buffer")
    if sample_rate is None:
        sample_rate = buffer.sample_rate if isinstance(buffer, AudioBuffer) else 16000
    padded, _ = _padded(x, config)
    frames = sliding_window_view(padded, config.frame_len)[::config.hop]
    bins = np.fft.rfft(frames * config.taper(), axis=1)
    return Spectrogram(bins, config, sample_rate, len(x))


def magnitude(spec: Spectrogram) -> np.ndarray:
    return np.abs(spec.bins)


def _wola(bins: np.ndarray, config: StftConfig, length: int) -> np.ndarray:
    n, hop = config.frame_len, config.hop
    win = config.taper()
    m = bins.shape[0]
    total = (m - 1) * hop + n
    frames = np.fft.irfft(bins, n=n, axis=1) * win
    out = np.zeros(total)
    norm = np.zeros(total)
    for i in range(m):
        out[i * hop:i * hop + n] += frames[i]
        norm[i * hop:i * hop + n] += win * win
    offset = n // 2 if config.center else 0
    out, norm = out[offset:offset + length], norm[offset:offset + length]
    nz = norm > 1e-12
    out[nz] /= norm[nz]
    out[~nz] = 0.0
    return out


def istft(spec: Spectrogram) -> AudioBuffer:
    """Least-squares inverse: windowed overlap-add normalised by the summed squared window."""
    return AudioBuffer(_wola(spec.bins, spec.config, spec.length), spec.sample_rate)


def griffin_lim(spec: Spectrogram, k: int = 1) -> AudioBuffer:
    """Reconstruct audio whose STFT magnitude approximates ``|spec|``.

    The iteration starts from ``spec`` itself, phase included, and alternates
    between the consistent set (istft then stft) and the target magnitude.
    ``k=0`` is plain ``istft(spec)``.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    target = np.abs(spec.bins)
    config, length = spec.config, spec.length
    current = spec.bins
    for _ in range(k):
        y = _wola(current, config, length)
        rebuilt = stft(y, config, spec.sample_rate).bins
        current = target * np.exp(1j * np.angle(rebuilt))
    return AudioBuffer(_wola(current, config, length), spec.sample_rate)


def consistency_error(spec: Spectrogram, audio: AudioBuffer) -> float:
    """Frobenius distance between ``|stft(audio)|`` and ``|spec|``."""
    rebuilt = stft(audio, spec.config, spec.sample_rate)
    return float(np.linalg.norm(np.abs(rebuilt.bins) - np.abs(spec.bins)))


def write_spectrogram_csv(spec: Spectrogram, path) -> None:
    """Dump as ``frame,bin,re,im`` rows, frame-major."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "bin", "re", "im"])
        for m, row in enumerate(spec.bins):
            for b, v in enumerate(row):
                w.writerow([m, b, repr(float(v.real)), repr(float(v.imag))])
