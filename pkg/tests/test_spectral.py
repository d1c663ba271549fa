import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisoshift.errors import DegenerateInputError, DomainTagError, InvalidInputError
from anisoshift.spectral import (
    COMPRESSED,
    RAW,
    ComplexSpectrogram,
    SpectralConfig,
    Waveform,
    compress,
    decompress,
    istft,
    normalize,
    stft,
)

CFG = SpectralConfig()


def test_frame_and_bin_count():
    s = stft(Waveform(np.random.default_rng(0).standard_normal(16000)), CFG)
    assert s.shape == (126, 256)
    assert s.domain == RAW


@pytest.mark.parametrize("length", [1, 100, 255, 256, 511, 1000, 16000, 16001])
def test_shape_law(length):
    s = stft(Waveform(np.ones(length)), CFG)
    assert s.shape == (1 + length // CFG.hop, CFG.fft_size // 2 + 1)


def test_zeros_in_zeros_out():
    s = stft(Waveform(np.zeros(4000)), CFG)
    assert not np.any(s.values)
    w = istft(ComplexSpectrogram(np.zeros((32, 256))), CFG, out_len=4000)
    assert not np.any(w.samples)


def test_bin_centred_sinusoid():
    b = 40
    n = np.arange(16000)
    s = stft(Waveform(np.cos(2 * np.pi * b * n / CFG.fft_size)), CFG)
    peaks = np.argmax(np.abs(s.values[2:-2]), axis=1)
    assert np.all(peaks == b)


def test_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        stft(np.array([]), CFG)
    with pytest.raises(InvalidInputError):
        stft(np.array([0.0, np.nan, 1.0]), CFG)


def test_roundtrip_white_noise():
    x = np.random.default_rng(1).standard_normal(16000)
    y = istft(stft(Waveform(x), CFG), CFG, out_len=x.size).samples
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-6


def test_roundtrip_sinusoid():
    n = np.arange(12345)
    x = 0.7 * np.sin(2 * np.pi * 440.0 * n / 16000)
    y = istft(stft(Waveform(x), CFG), CFG, out_len=x.size).samples
    assert np.max(np.abs(y - x)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=300, max_value=5000), st.integers(min_value=0, max_value=2**31))
def test_roundtrip_property(length, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, length)
    y = istft(stft(Waveform(x), CFG), CFG, out_len=length).samples
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-6


def test_linearity():
    rng = np.random.default_rng(2)
    w1, w2 = rng.standard_normal(3000), rng.standard_normal(3000)
    lhs = stft(Waveform(2.5 * w1 - 0.3 * w2), CFG).values
    rhs = 2.5 * stft(Waveform(w1), CFG).values - 0.3 * stft(Waveform(w2), CFG).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@pytest.mark.parametrize("value, expected", [(4 + 0j, 1 + 0j), (0j, 0j), (4j, 1j)])
def test_compress_examples(value, expected):
    s = ComplexSpectrogram(np.full((1, 256), value), RAW, CFG)
    c = compress(s)
    assert c.domain == COMPRESSED
    np.testing.assert_allclose(c.values, expected, atol=1e-15)
    back = decompress(c)
    np.testing.assert_allclose(back.values, value, atol=1e-14)


def test_compression_roundtrip_and_phase():
    rng = np.random.default_rng(3)
    v = rng.standard_normal((20, 256)) + 1j * rng.standard_normal((20, 256))
    s = ComplexSpectrogram(v * 10 ** rng.uniform(-3, 3, v.shape), RAW, CFG)
    c = compress(s)
    back = decompress(c)
    rel = np.abs(back.values - s.values) / np.abs(s.values)
    assert rel.max() < 1e-6
    np.testing.assert_allclose(np.angle(c.values), np.angle(s.values), rtol=0, atol=1e-15)


def test_domain_tags_enforced():
    s = ComplexSpectrogram(np.ones((2, 256)), RAW, CFG)
    with pytest.raises(DomainTagError):
        decompress(s)
    with pytest.raises(DomainTagError):
        compress(compress(s))


def test_normalize():
    w, g = normalize(Waveform([0.1, -0.5, 0.25]))
    assert g == 0.5
    np.testing.assert_array_equal(w.samples, [0.2, -1.0, 0.5])
    w1, g1 = normalize(Waveform([1.0, -0.3]))
    assert g1 == 1.0 and np.array_equal(w1.samples, [1.0, -0.3])
    x = np.random.default_rng(4).standard_normal(100)
    w2, g2 = normalize(Waveform(x))
    np.testing.assert_allclose(w2.samples * g2, x, atol=1e-12)
    with pytest.raises(DegenerateInputError):
        normalize(Waveform(np.zeros(10)))


def test_config_validation():
    with pytest.raises(ValueError):
        SpectralConfig(hop=0)
    with pytest.raises(ValueError):
        SpectralConfig(comp_exponent=1.5)
    with pytest.raises(ValueError):
        SpectralConfig(comp_scale=0)
