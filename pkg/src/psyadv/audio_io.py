"""Audio buffers, 16-bit PCM WAV I/O and synthetic test signals."""

from __future__ import annotations

import os
import wave
from dataclasses import dataclass

import numpy as np

PCM_SCALE = 32768.0
PCM_MAX = 32767


class WavError(ValueError):
    """Base class for WAV decoding failures."""


class UnsupportedCodecError(WavError):
    pass


class MultiChannelError(WavError):
    pass


class BitDepthError(WavError):
    pass


class EmptyAudioError(WavError):
    pass


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Immutable mono audio: float samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    __hash__ = None

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


def as_samples(x) -> np.ndarray:
    """Return the float64 sample vector of an AudioBuffer or array-like."""
    if isinstance(x, AudioBuffer):
        return x.samples
    return np.asarray(x, dtype=np.float64).reshape(-1)


def quantize(samples) -> np.ndarray:
    """Map float samples to int16 codes.

    Samples are clamped to [-1, 1], scaled by 32768 and rounded half away
    from zero; the result is clamped to the symmetric range [-32767, 32767]
    so that +1.0 and -1.0 map to +/-32767.
    """
    s = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0) * PCM_SCALE
    q = np.sign(s) * np.floor(np.abs(s) + 0.5)
    return np.clip(q, -PCM_MAX, PCM_MAX).astype("<i2")


def read_wav(path) -> AudioBuffer:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    try:
        with wave.open(path, "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedCodecError(f"{path}: not linear PCM ({msg})") from exc
        raise WavError(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise WavError(f"{path}: truncated file") from exc
    if channels != 1:
        raise MultiChannelError(f"{path}: expected mono, found {channels} channels")
    if width != 2:
        raise BitDepthError(f"{path}: expected 16-bit samples, found {8 * width}-bit")
    codes = np.frombuffer(raw, dtype="<i2")
    if codes.size == 0:
        raise EmptyAudioError("empty audio")
    return AudioBuffer(codes.astype(np.float64) / PCM_SCALE, rate)


def write_wav(buffer: AudioBuffer, path) -> None:
    codes = quantize(buffer.samples)
    with open(path, "wb") as fh, wave.open(fh, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(buffer.sample_rate)
        w.writeframes(codes.tobytes())


def synth_tone(freq: float, duration: float, amplitude: float = 1.0,
               sample_rate: int = 16000) -> AudioBuffer:
    if not 0 < freq < sample_rate / 2:
        raise ValueError(f"frequency {freq} Hz must lie in (0, {sample_rate / 2}) Hz")
    if not 0 <= amplitude <= 1:
        raise ValueError(f"amplitude must lie in [0, 1], got {amplitude}")
    n = np.arange(int(round(duration * sample_rate)))
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq * n / sample_rate), sample_rate)


# Shared tone grid for the keyword classes. Every class uses every frequency,
# so each tone is present (and masking) in every utterance; classes differ in
# how energy is distributed across the grid and over the two halves.
KEYWORD_FREQS = (400.0, 900.0, 1500.0, 2300.0, 3300.0, 4500.0)


def keyword_templates(n_classes: int, sample_rate: int = 16000,
                      duration: float = 0.25) -> np.ndarray:
    """Noiseless class templates, shape (n_classes, n_samples)."""
    if n_classes < 2:
        raise ValueError("n_classes must be at least 2")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    n_freqs = len(KEYWORD_FREQS)
    # class-dependent two-syllable envelope: the dominant tone switches halfway
    half = (np.arange(n) >= n // 2).astype(np.float64)
    ramp = np.minimum(1.0, np.minimum(np.arange(n), n - 1 - np.arange(n)) / (0.01 * sample_rate))
    out = np.zeros((n_classes, n))
    for c in range(n_classes):
        first = c % n_freqs
        second = (c + 1 + c // n_freqs) % n_freqs
        for j, f in enumerate(KEYWORD_FREQS):
            a1 = 0.3 if j == first else 0.04
            a2 = 0.3 if j == second else 0.04
            amp = a1 * (1 - half) + a2 * half
            out[c] += amp * np.sin(2 * np.pi * f * t)
        out[c] *= ramp
    return out


def build_keyword_dataset(n_classes: int = 4, n_per_class: int = 25, seed: int = 0,
                          sample_rate: int = 16000, duration: float = 0.25,
                          noise: float = 0.005):
    """Seeded toy keyword corpus.

    Each utterance is its class template, shifted by up to 2 ms, with a
    random gain, a weak tone at a random frequency and white noise.
    Returns ``(buffers, labels)`` ordered class by class.
    """
    if n_classes < 2:
        raise ValueError("n_classes must be at least 2")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    base = keyword_templates(n_classes, sample_rate, duration)
    buffers, labels = [], []
    for c in range(n_classes):
        for _ in range(n_per_class):
            # small time shift, gain jitter and a weak distractor tone
            shift = rng.integers(0, int(0.002 * sample_rate) + 1)
            x = np.roll(base[c], shift) * rng.uniform(0.8, 1.2)
            x = x + 0.02 * np.sin(2 * np.pi * rng.uniform(200, 6000) * t)
            x = x + noise * rng.standard_normal(n)
            buffers.append(AudioBuffer(np.clip(x, -1.0, 1.0), sample_rate))
            labels.append(c)
    return buffers, np.array(labels, dtype=np.int64)
