"""Iterative psychoacoustic PGD attack and its baselines.

Each iteration takes the FGSM direction toward the target label, constrains
it (equalization under the masking thresholds, hard clipping, or nothing),
and adds it to the running adversarial example.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioBuffer, as_samples, synth_tone
from .oracle import GradientOracle
from .projection import ALL_BINS, VIOLATING_ONLY, equalize, hard_clip, harmonic_distortion
from .psychoacoustic import MaskingThresholds, generate_thresholds
from .spectral import StftConfig, griffin_lim, magnitude, stft

EQUALIZE_VIOLATING = "equalize_violating"
EQUALIZE_ALL = "equalize_all"
HARD_CLIP = "hard_clip"
PLAIN_SCALE = "plain_scale"
MODES = (EQUALIZE_VIOLATING, EQUALIZE_ALL, HARD_CLIP, PLAIN_SCALE)

_EQUALIZE_MODES = {EQUALIZE_VIOLATING: VIOLATING_ONLY, EQUALIZE_ALL: ALL_BINS}


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 1.0
    k: int = 1
    max_iters: int = 1000
    mode: str = EQUALIZE_VIOLATING
    beta: float | None = None
    stft: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.k < 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == HARD_CLIP and (self.beta is None or self.beta <= 0):
            raise ValueError("hard_clip mode needs a positive beta")


@dataclass(frozen=True, eq=False)
class AttackOutcome:
    adversarial: AudioBuffer
    success: bool
    iterations_used: int
    final_loss: float
    snr_db: float
    per_iteration_loss: tuple
    violations: int
    wall_time: float = 0.0


def fgsm_step(oracle: GradientOracle, x_adv, target: int) -> AudioBuffer:
    """Candidate perturbation ``-sign(grad loss)``: a descent step toward ``target``."""
    v = as_samples(x_adv)
    if v.shape[0] != oracle.input_len:
        raise ValueError(f"expected {oracle.input_len} samples, got {v.shape[0]}")
    g = np.asarray(oracle.grad(x_adv, target), dtype=np.float64)
    rate = x_adv.sample_rate if isinstance(x_adv, AudioBuffer) else oracle.sample_rate
    return AudioBuffer(-np.sign(g), rate)


def snr_db(x, x_adv) -> float:
    """10 log10(sum x^2 / sum (x_adv - x)^2); +inf for a zero perturbation."""
    a, b = as_samples(x), as_samples(x_adv)
    noise = float(np.dot(b - a, b - a))
    if noise == 0.0:
        return float("inf")
    sig = float(np.dot(a, a))
    if sig == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(sig / noise))


def threshold_violation_count(x, x_adv, thresholds: MaskingThresholds, factor: float = 2.0) -> int:
    """Bins where the perturbation's STFT magnitude exceeds ``factor`` times the threshold."""
    diff = as_samples(x_adv) - as_samples(x)
    spec = stft(diff, thresholds.config, thresholds.sample_rate)
    return int(np.count_nonzero(np.abs(spec.bins) > factor * thresholds.levels))


def project(delta: AudioBuffer, thresholds: MaskingThresholds | None, config: AttackConfig) -> AudioBuffer:
    """Constrain a candidate perturbation according to ``config.mode``."""
    if config.mode == HARD_CLIP:
        return hard_clip(delta, config.beta)
    if config.mode == PLAIN_SCALE:
        return delta
    spec = stft(delta, config.stft, delta.sample_rate)
    projected = equalize(spec, thresholds, _EQUALIZE_MODES[config.mode])
    if np.any(np.abs(projected.bins) > thresholds.levels + 1e-9):
        raise AssertionError("equalized perturbation exceeds the masking thresholds")
    return griffin_lim(projected, config.k)


def run_attack(oracle: GradientOracle, x: AudioBuffer, target: int,
               config: AttackConfig = AttackConfig(),
               thresholds: MaskingThresholds | None = None) -> AttackOutcome:
    """Drive ``oracle`` to label ``target`` starting from ``x``.

    Thresholds are computed once from ``x`` (pass ``thresholds`` to reuse a
    precomputed set). The loop stops at the first iterate classified as
    ``target`` or after ``max_iters`` updates; failure to converge is
    reported through ``success=False``.
    """
    start = time.perf_counter()
    if x.sample_rate != oracle.sample_rate:
        raise ValueError(f"buffer rate {x.sample_rate} Hz != oracle rate {oracle.sample_rate} Hz")
    if len(x) != oracle.input_len:
        raise ValueError(f"buffer has {len(x)} samples, oracle expects {oracle.input_len}")
    if thresholds is None:
        thresholds = generate_thresholds(magnitude(stft(x, config.stft)), x.sample_rate, config.stft)

    x_adv = x
    losses = []
    iters = 0
    while oracle.classify(x_adv) != target and iters < config.max_iters:
        delta = fgsm_step(oracle, x_adv, target)
        step = project(delta, thresholds, config)
        x_adv = x.with_samples(np.clip(x_adv.samples + config.epsilon * step.samples, -1.0, 1.0))
        iters += 1
        losses.append(oracle.loss(x_adv, target))

    success = oracle.classify(x_adv) == target
    return AttackOutcome(
        adversarial=x_adv,
        success=success,
        iterations_used=iters,
        final_loss=losses[-1] if losses else oracle.loss(x_adv, target),
        snr_db=snr_db(x, x_adv),
        per_iteration_loss=tuple(losses),
        violations=threshold_violation_count(x, x_adv, thresholds),
        wall_time=time.perf_counter() - start,
    )


def sample_pairs(oracle: GradientOracle, buffers, n_pairs: int, seed: int, n_classes: int):
    """Seeded (sample index, target) pairs with target != the current prediction."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        i = int(rng.integers(len(buffers)))
        current = oracle.classify(buffers[i])
        choices = [c for c in range(n_classes) if c != current]
        pairs.append((i, int(choices[rng.integers(len(choices))])))
    return pairs


def compare_projections(freq: float = 500.0, amplitude: float = 0.5, clip_ratio: float = 0.6,
                        k: int = 1, duration: float = 1.0, sample_rate: int = 16000,
                        stft_config: StftConfig = StftConfig()) -> dict:
    """Constrain the same tonal candidate perturbation by hard clipping and by equalization.

    The candidate is a sine at ``freq``; clipping cuts it at
    ``clip_ratio * amplitude`` while equalization scales its spectrogram to
    the masking thresholds of the same tone and resynthesises it with
    Griffin-Lim. Returns ``{"hard_clip": AudioBuffer, "equalize": AudioBuffer,
    "candidate": AudioBuffer}``.
    """
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    if not 0 < clip_ratio < 1:
        raise ValueError("clip_ratio must lie in (0, 1)")
    tone = synth_tone(freq, duration, amplitude, sample_rate)
    spec = stft(tone, stft_config)
    thresholds = generate_thresholds(magnitude(spec), sample_rate, stft_config)
    return {
        "candidate": tone,
        "hard_clip": hard_clip(tone, clip_ratio * amplitude),
        "equalize": griffin_lim(equalize(spec, thresholds, VIOLATING_ONLY), k),
    }


def distortion_report(outputs: dict, freq: float) -> list[dict]:
    """Harmonic distortion and SNR against the candidate for each constrained output."""
    cand = outputs["candidate"]
    return [{"method": name,
             "harmonic_distortion_db": harmonic_distortion(outputs[name], freq),
             "snr_db": snr_db(cand, outputs[name])}
            for name in ("hard_clip", "equalize")]
