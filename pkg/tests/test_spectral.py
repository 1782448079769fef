import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psyadv.audio_io import AudioBuffer
from psyadv.spectral import (Spectrogram, StftConfig, consistency_error, griffin_lim, istft,
                             magnitude, stft, write_spectrogram_csv)

CFG = StftConfig()
SMALL = StftConfig(frame_len=256, hop=64)


def _interior(cfg, length):
    # samples covered by the maximal number of frames
    return slice(cfg.frame_len, length - cfg.frame_len)


def test_default_config():
    assert (CFG.frame_len, CFG.hop, CFG.window) == (2048, 512, "hann")


@pytest.mark.parametrize("kwargs", [dict(frame_len=1000), dict(hop=0), dict(hop=4096),
                                    dict(hop=1536), dict(window="kaiser")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        StftConfig(**kwargs)


@pytest.mark.parametrize("window,hop", [("hann", 512), ("hann", 1024), ("rect", 2048),
                                        ("hamming", 1024)])
def test_cola_pairs_accepted(window, hop):
    StftConfig(window=window, hop=hop)


def test_frame_count_and_shape():
    for n in (1, 511, 512, 4000, 4096):
        spec = stft(np.ones(n), CFG)
        assert spec.shape == (1 + n // 512, 1025)


def test_empty_buffer_rejected():
    with pytest.raises(ValueError):
        stft(np.zeros(0))


def test_zero_in_zero_out():
    spec = stft(AudioBuffer(np.zeros(3000), 16000))
    assert not np.any(spec.bins)
    assert not np.any(istft(spec).samples)


def test_bin_centre_sine_rect_single_frame():
    cfg = StftConfig(frame_len=256, hop=256, window="rect", center=False)
    n = np.arange(256)
    x = np.sin(2 * np.pi * 20 * n / 256)
    spec = stft(x, cfg)
    assert spec.shape == (1, 129)
    # direct DFT oracle
    direct = np.exp(-2j * np.pi * np.arange(129)[:, None] * n / 256) @ x
    np.testing.assert_allclose(spec.bins[0], direct, atol=1e-9)
    energy = np.abs(spec.bins[0]) ** 2
    assert int(np.argmax(energy)) == 20
    assert energy[20] / energy.sum() > 1 - 1e-12


def test_parseval_per_frame(rng):
    x = rng.standard_normal(3000)
    spec = stft(x, SMALL)
    win = SMALL.taper()
    padded = np.pad(x, 128, mode="reflect")
    for m in range(spec.shape[0]):
        seg = padded[m * 64:m * 64 + 256]
        seg = np.pad(seg, (0, 256 - seg.size))
        frame_energy = sum((win[i] * seg[i]) ** 2 for i in range(256))
        b = np.abs(spec.bins[m]) ** 2
        bins_energy = (b[0] + b[-1] + 2 * b[1:-1].sum()) / 256
        assert frame_energy == pytest.approx(bins_energy, rel=1e-10)


def test_magnitude_pythagorean():
    bins = np.zeros((2, 3), complex)
    bins[0, 1] = 3 + 4j
    spec = Spectrogram(bins, StftConfig(frame_len=4, hop=1), 16000, 1)
    assert magnitude(spec)[0, 1] == 5.0
    assert magnitude(spec)[0, 0] == 0.0


def test_magnitude_phase_rotation_invariant(rng):
    spec = stft(rng.standard_normal(2000), SMALL)
    rotated = spec.with_bins(spec.bins * np.exp(1j * rng.uniform(0, 2 * np.pi)))
    np.testing.assert_allclose(magnitude(rotated), magnitude(spec), rtol=1e-12, atol=1e-12)


def test_istft_round_trip(rng):
    x = rng.standard_normal(6000)
    y = istft(stft(x, CFG)).samples
    s = _interior(CFG, x.size)
    assert np.max(np.abs(y[s] - x[s])) <= 1e-6 * np.max(np.abs(x[s]))
    # window-squared normalisation also recovers the edges
    np.testing.assert_allclose(y, x, atol=1e-10)


def test_istft_linear(rng):
    spec = stft(rng.standard_normal(3000), CFG)
    np.testing.assert_allclose(istft(spec.with_bins(2 * spec.bins)).samples,
                               2 * istft(spec).samples, rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_stft_linear(a, b, seed):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(1500), r.standard_normal(1500)
    lhs = stft(a * x + b * y, SMALL).bins
    rhs = a * stft(x, SMALL).bins + b * stft(y, SMALL).bins
    scale = max(np.max(np.abs(lhs)), 1e-12)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * scale


def test_griffin_lim_k0_is_istft(rng):
    spec = stft(rng.standard_normal(3000), CFG)
    mod = spec.with_bins(spec.bins * rng.uniform(0, 2, spec.shape))
    assert np.array_equal(griffin_lim(mod, 0).samples, istft(mod).samples)


@pytest.mark.parametrize("k", [0, 1, 2, 5, 8])
def test_griffin_lim_fixed_point(rng, k):
    x = rng.standard_normal(5000) * 0.3
    y = griffin_lim(stft(AudioBuffer(x, 16000)), k).samples
    assert np.max(np.abs(y - x)) <= 1e-6 * np.max(np.abs(x))


def test_griffin_lim_negative_k():
    with pytest.raises(ValueError):
        griffin_lim(stft(np.ones(100)), -1)


def test_griffin_lim_consistency_non_increasing(rng):
    for _ in range(5):
        spec = stft(rng.standard_normal(4000), CFG)
        mod = spec.with_bins(spec.bins * rng.uniform(0, 2, spec.shape)
                             * np.exp(1j * rng.uniform(-1, 1, spec.shape)))
        errs = [consistency_error(mod, griffin_lim(mod, k)) for k in range(9)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(errs, errs[1:]))


def test_spectrogram_shape_validation():
    with pytest.raises(ValueError):
        Spectrogram(np.zeros((2, 10)), CFG, 16000, 600)
    with pytest.raises(ValueError):
        Spectrogram(np.zeros((5, 1025)), CFG, 16000, 600)
    with pytest.raises(ValueError):
        Spectrogram(np.full((2, 1025), np.nan), CFG, 16000, 600)


def test_uncentred_frames_cover_signal():
    cfg = StftConfig(frame_len=256, hop=64, center=False)
    assert cfg.n_frames(256) == 1
    assert cfg.n_frames(257) == 2
    assert cfg.n_frames(100) == 1
    x = np.arange(300, dtype=float)
    spec = stft(x, cfg)
    n = np.arange(256)
    # frame 1 covers samples [64, 320) with zero padding past the end
    seg = np.pad(x[64:], (0, 20)) * cfg.taper()
    np.testing.assert_allclose(spec.bins[1], np.exp(-2j * np.pi * np.arange(129)[:, None] * n / 256) @ seg,
                               atol=1e-8)


def test_spectrogram_csv(tmp_path):
    spec = stft(np.sin(np.arange(300) * 0.1), StftConfig(frame_len=64, hop=16))
    path = tmp_path / "s.csv"
    write_spectrogram_csv(spec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "frame,bin,re,im"
    assert len(lines) == 1 + spec.shape[0] * spec.shape[1]
    frame, b, re, im = lines[1 + 33 + 2].split(",")
    assert (int(frame), int(b)) == (1, 2)
    assert complex(float(re), float(im)) == spec.bins[1, 2]
