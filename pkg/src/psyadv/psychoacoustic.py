"""Frequency-masking thresholds from a magnitude spectrogram.

Every spectral peak is treated as a tonal masker. Each masker spreads over
the Bark axis (Schroeder spreading function), and the per-bin global
threshold is the power sum of the absolute threshold of hearing and all
individual masker contributions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .spectral import StftConfig

FULL_SCALE_SPL = 96.0
ATH_CEILING = 96.0
PROMINENCE_DB = 7.0
DECIMATION_BARK = 0.5
SPREAD_CUTOFF_BARK = 10.0
_TINY = 1e-12


def hz_to_bark(freq):
    """26.81 f / (1960 + f) - 0.53, clamped to [0, 25]."""
    f = np.asarray(freq, dtype=np.float64)
    z = np.clip(26.81 * f / (1960.0 + f) - 0.53, 0.0, 25.0)
    return z if z.ndim else float(z)


def ath_db(freq):
    """Threshold in quiet (Terhardt) in dB SPL; 96 dB at or below 20 Hz."""
    f = np.asarray(freq, dtype=np.float64)
    khz = np.maximum(f, 20.0) / 1000.0
    level = 3.64 * khz ** -0.8 - 6.5 * np.exp(-0.6 * (khz - 3.3) ** 2) + 1e-3 * khz ** 4
    level = np.where(f <= 20.0, ATH_CEILING, level)
    return level if level.ndim else float(level)


@dataclass(frozen=True)
class Masker:
    frame: int
    bin: int
    bark: float
    level_db: float


def spreading_db(dz):
    """Schroeder spreading function in dB at Bark distance ``dz`` (maskee - masker)."""
    u = np.asarray(dz, dtype=np.float64) + 0.474
    return 15.81 + 7.5 * u - 17.5 * np.sqrt(1.0 + u * u)


def spread(masker: Masker, target_bark):
    """Individual masking threshold of ``masker`` at ``target_bark``, dB SPL."""
    dz = np.asarray(target_bark, dtype=np.float64) - masker.bark
    out = masker.level_db + spreading_db(dz) - (6.025 + 0.275 * masker.bark)
    out = np.where(np.abs(dz) > SPREAD_CUTOFF_BARK, -np.inf, out)
    return out if out.ndim else float(out)


def _neighborhood(freq: float) -> int:
    if freq < 2500.0:
        return 2
    if freq < 5500.0:
        return 3
    return 6


def find_tonal_maskers(frame_psd, freqs, frame: int = 0) -> list[Masker]:
    """Tonal maskers of one frame.

    ``frame_psd`` is the normalised per-bin level in dB SPL and ``freqs`` the
    bin centre frequencies. A bin qualifies when it is a strict local maximum
    that is at least 7 dB above every bin 2..d away (d = 2, 3 or 6 depending
    on frequency). Its level is the power sum of the peak and its two
    neighbours. Maskers under the threshold in quiet are dropped, then among
    maskers closer than 0.5 Bark only the loudest survives.
    """
    p = np.asarray(frame_psd, dtype=np.float64)
    freqs = np.asarray(freqs, dtype=np.float64)
    n = p.size
    found = []
    for k in range(1, n - 1):
        if not (p[k] > p[k - 1] and p[k] > p[k + 1]):
            continue
        d = _neighborhood(freqs[k])
        lo, hi = max(0, k - d), min(n, k + d + 1)
        others = np.r_[p[lo:max(lo, k - 1)], p[min(hi, k + 2):hi]]
        if others.size and np.any(p[k] - others < PROMINENCE_DB):
            continue
        level = 10.0 * np.log10(np.sum(10.0 ** (p[k - 1:k + 2] / 10.0)))
        if level < ath_db(freqs[k]):
            continue
        found.append(Masker(frame, k, hz_to_bark(freqs[k]), float(level)))

    kept: list[Masker] = []
    for m in sorted(found, key=lambda m: (-m.level_db, m.bin)):
        if all(abs(m.bark - o.bark) >= DECIMATION_BARK for o in kept):
            kept.append(m)
    return sorted(kept, key=lambda m: m.bin)


@dataclass(frozen=True, eq=False)
class MaskingThresholds:
    """Per-bin linear magnitude ceilings.

    ``levels`` is in the same units as the spectrogram magnitudes it was
    derived from; ``db_floor`` is the offset added to ``20 log10 |X|`` to
    reach dB SPL.
    """

    levels: np.ndarray
    db_floor: float
    config: StftConfig
    sample_rate: int

    @property
    def shape(self):
        return self.levels.shape

    def levels_db(self) -> np.ndarray:
        """Thresholds in dB SPL."""
        return 20.0 * np.log10(self.levels) + self.db_floor


def _frame_threshold_db(psd: np.ndarray, freqs: np.ndarray, barks: np.ndarray,
                        ath: np.ndarray, frame: int) -> tuple[np.ndarray, list[Masker]]:
    maskers = find_tonal_maskers(psd, freqs, frame)
    power = 10.0 ** (ath / 10.0)
    for m in maskers:
        power = power + 10.0 ** (spread(m, barks) / 10.0)
    return 10.0 * np.log10(power), maskers


def generate_thresholds(mag, sample_rate: int, config: StftConfig = StftConfig(),
                        return_maskers: bool = False):
    """Masking thresholds for a (frames, bins) magnitude spectrogram.

    Levels are normalised so that the loudest bin of the whole spectrogram sits
    at 96 dB SPL. For an all-zero input the reference is the peak bin of a
    full-scale sinusoid, ``sum(window) / 2``.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != config.n_bins:
        raise ValueError(f"magnitude shape {mag.shape} does not match {config.n_bins} bins")
    if np.any(mag < 0) or not np.all(np.isfinite(mag)):
        raise ValueError("magnitudes must be finite and non-negative")
    peak = mag.max() if mag.size else 0.0
    if peak <= 0.0:
        peak = config.taper().sum() / 2.0
    db_floor = FULL_SCALE_SPL - 20.0 * np.log10(peak)

    freqs = config.bin_freqs(sample_rate)
    barks = hz_to_bark(freqs)
    ath = ath_db(freqs)
    out_db = np.empty_like(mag)
    all_maskers = []
    for i, row in enumerate(mag):
        if not np.any(row > 0):
            out_db[i] = ath
            continue
        psd = 20.0 * np.log10(np.maximum(row, _TINY)) + db_floor
        out_db[i], maskers = _frame_threshold_db(psd, freqs, barks, ath, i)
        all_maskers.extend(maskers)
    levels = 10.0 ** ((out_db - db_floor) / 20.0)
    result = MaskingThresholds(levels, float(db_floor), config, int(sample_rate))
    if return_maskers:
        return result, all_maskers
    return result


def write_thresholds_csv(thresholds: MaskingThresholds, path) -> None:
    """Dump as ``frame,bin,freq_hz,threshold_db`` rows (dB SPL)."""
    freqs = thresholds.config.bin_freqs(thresholds.sample_rate)
    db = thresholds.levels_db()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "bin", "freq_hz", "threshold_db"])
        for m, row in enumerate(db):
            for b, v in enumerate(row):
                w.writerow([m, b, repr(float(freqs[b])), repr(float(v))])
