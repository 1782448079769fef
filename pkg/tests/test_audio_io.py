import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psyadv.audio_io import (AudioBuffer, BitDepthError, EmptyAudioError, MultiChannelError,
                             UnsupportedCodecError, build_keyword_dataset, keyword_templates,
                             read_wav, synth_tone, write_wav)


def _write_pcm(path, codes, rate=16000, channels=1, width=2):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(np.asarray(codes, dtype=f"<i{width}").tobytes())


def _data_chunk(path):
    with wave.open(str(path), "rb") as w:
        return w.readframes(w.getnframes())


def _write_float_wav(path):
    data = np.array([0.0, 0.5], dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, 1, 16000, 16000 * 4, 4, 32)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + \
        struct.pack("<I", len(data)) + data
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def test_read_scales_by_32768(tmp_path):
    p = tmp_path / "a.wav"
    _write_pcm(p, [0, 16384, -32768])
    buf = read_wav(p)
    assert buf.samples.tolist() == [0.0, 0.5, -1.0]
    assert buf.sample_rate == 16000


def test_read_keeps_header_rate(tmp_path):
    p = tmp_path / "a.wav"
    _write_pcm(p, [1, 2, 3], rate=22050)
    assert read_wav(p).sample_rate == 22050


def test_empty_data_chunk(tmp_path):
    p = tmp_path / "empty.wav"
    _write_pcm(p, [])
    with pytest.raises(EmptyAudioError, match="empty audio"):
        read_wav(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "nope.wav")


def test_non_pcm_codec(tmp_path):
    p = tmp_path / "float.wav"
    _write_float_wav(p)
    with pytest.raises(UnsupportedCodecError):
        read_wav(p)


def test_stereo_rejected(tmp_path):
    p = tmp_path / "stereo.wav"
    _write_pcm(p, [0, 0, 1, 1], channels=2)
    with pytest.raises(MultiChannelError):
        read_wav(p)


def test_bit_depth_rejected(tmp_path):
    p = tmp_path / "32.wav"
    _write_pcm(p, [0, 1, 2], width=4)
    with pytest.raises(BitDepthError):
        read_wav(p)


def test_write_endpoints(tmp_path):
    p = tmp_path / "w.wav"
    write_wav(AudioBuffer([1.0, -1.0, 0.0], 16000), p)
    assert np.frombuffer(_data_chunk(p), "<i2").tolist() == [32767, -32767, 0]


def test_write_clamps(tmp_path):
    p = tmp_path / "w.wav"
    write_wav(AudioBuffer([2.0, -3.0], 16000), p)
    assert np.frombuffer(_data_chunk(p), "<i2").tolist() == [32767, -32767]


def test_write_rounds_half_away_from_zero(tmp_path):
    p = tmp_path / "w.wav"
    write_wav(AudioBuffer([0.5 / 32768, -0.5 / 32768, 1.49 / 32768], 16000), p)
    assert np.frombuffer(_data_chunk(p), "<i2").tolist() == [1, -1, 1]


def test_file_round_trip_is_byte_exact(tmp_path, rng):
    src, dst = tmp_path / "src.wav", tmp_path / "dst.wav"
    codes = rng.integers(-32767, 32768, size=5000)
    codes[:3] = [32767, -32767, 0]
    _write_pcm(src, codes)
    write_wav(read_wav(src), dst)
    assert _data_chunk(dst) == _data_chunk(src)


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        write_wav(AudioBuffer([0.0], 16000), tmp_path / "missing_dir" / "x.wav")


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 300), elements=st.floats(-1, 1)))
def test_buffer_round_trip_error(tmp_path_factory, samples):
    p = tmp_path_factory.mktemp("rt") / "b.wav"
    buf = AudioBuffer(samples, 16000)
    write_wav(buf, p)
    back = read_wav(p)
    assert np.max(np.abs(back.samples - buf.samples)) <= 1 / 32767


def test_buffer_is_immutable():
    buf = AudioBuffer([0.1, 0.2], 8000)
    with pytest.raises(ValueError):
        buf.samples[0] = 1.0


def test_buffer_rejects_bad_rate_and_nan():
    with pytest.raises(ValueError):
        AudioBuffer([0.0], 0)
    with pytest.raises(ValueError):
        AudioBuffer([np.nan], 16000)


def test_tone_at_nyquist_rejected():
    with pytest.raises(ValueError):
        synth_tone(8000, 1.0, 0.5, 16000)


def test_zero_amplitude_tone():
    assert not np.any(synth_tone(440, 0.1, 0.0).samples)


def test_tone_peak_bin_direct_dft():
    x = synth_tone(500, 1.0, 0.8, 16000).samples
    n = x.size
    idx = np.arange(n)
    # direct DFT over the non-negative bins, in chunks
    mags = []
    for start in range(0, n // 2 + 1, 1000):
        k = np.arange(start, min(start + 1000, n // 2 + 1))[:, None]
        mags.append(np.abs(np.exp(-2j * np.pi * k * idx / n) @ x))
    assert int(np.argmax(np.concatenate(mags))) == round(500 / (16000 / n))


def test_tone_formula():
    x = synth_tone(1000, 0.01, 0.5, 16000).samples
    n = np.arange(x.size)
    np.testing.assert_allclose(x, 0.5 * np.sin(2 * np.pi * 1000 * n / 16000), atol=1e-15)


def test_dataset_deterministic():
    a, la = build_keyword_dataset(4, 5, seed=3)
    b, lb = build_keyword_dataset(4, 5, seed=3)
    assert np.array_equal(la, lb)
    assert all(x == y for x, y in zip(a, b))
    c, _ = build_keyword_dataset(4, 5, seed=4)
    assert not all(x == y for x, y in zip(a, c))


def test_dataset_counts_and_shapes():
    bufs, labels = build_keyword_dataset(4, 25, seed=0)
    assert len(bufs) == 100
    assert np.bincount(labels).tolist() == [25] * 4
    assert len({len(b) for b in bufs}) == 1
    assert {b.sample_rate for b in bufs} == {16000}
    assert all(np.max(np.abs(b.samples)) <= 1.0 for b in bufs)


def test_dataset_needs_two_classes():
    with pytest.raises(ValueError):
        build_keyword_dataset(1, 5)


@pytest.mark.parametrize("n_classes", [2, 4, 6, 9])
def test_templates_separable_by_nearest_template(n_classes):
    templates = keyword_templates(n_classes)
    # brute force: every template is strictly closest to itself
    dist = np.linalg.norm(templates[:, None, :] - templates[None, :, :], axis=2)
    for i in range(n_classes):
        others = np.delete(dist[i], i)
        assert dist[i, i] == 0 and others.min() > 0
        assert int(np.argmin(dist[i])) == i
