import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisoshift.data import (
    epoch_order,
    fit_noise,
    load_manifest,
    make_pair,
    measured_snr,
    mix_components,
    parse_snr,
    write_synthetic_corpus,
)
from anisoshift.errors import DegenerateInputError, InvalidInputError, ManifestError
from anisoshift.spectral import Waveform, write_wav


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_synthetic_corpus(tmp_path_factory.mktemp("corpus"), 2, 0.6, "-5:5", seed=1)


def test_parse_snr():
    assert parse_snr("3") == (3.0, 3.0)
    assert parse_snr(" -5:5 ") == (-5.0, 5.0)
    for bad in ("5:-5", "nan", "x", "inf:inf"):
        with pytest.raises(ValueError):
            parse_snr(bad)


def test_manifest_relative_paths(corpus):
    entries = load_manifest(corpus)
    assert len(entries) == 2
    assert entries[0].clean_path == corpus.parent / "clean_000.wav"
    assert entries[0].snr_db == (-5.0, 5.0)
    assert not entries[0].fixed_snr
    assert entries[0].item_id == "clean_000+noise_000"


@pytest.mark.parametrize("body, row", [
    ("a,b,c\n", 1),
    ("clean_path,noise_path,snr_db\nclean_000.wav,noise_000.wav\n", 2),
    ("clean_path,noise_path,snr_db\nclean_000.wav,noise_000.wav,0\nmissing.wav,noise_000.wav,0\n", 3),
    ("clean_path,noise_path,snr_db\nclean_000.wav,noise_000.wav,abc\n", 2),
])
def test_manifest_errors_carry_row(corpus, body, row):
    bad = corpus.parent / "bad.csv"
    bad.write_text(body)
    with pytest.raises(ManifestError) as info:
        load_manifest(bad)
    assert info.value.row == row


def test_missing_manifest(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "nope.csv")


def test_empty_manifest(tmp_path):
    (tmp_path / "m.csv").write_text("clean_path,noise_path,snr_db\n")
    assert load_manifest(tmp_path / "m.csv") == []


@settings(max_examples=30, deadline=None)
@given(snr=st.floats(-20, 20), seed=st.integers(0, 2**16))
def test_mix_hits_target_snr(snr, seed):
    rng = np.random.default_rng(seed)
    clean = Waveform(rng.standard_normal(800))
    noise = Waveform(rng.standard_normal(300))
    mix, scaled, _ = mix_components(clean, noise, snr, rng)
    assert abs(measured_snr(clean, scaled) - snr) < 1e-9
    np.testing.assert_allclose(mix.samples, clean.samples + scaled.samples, atol=1e-12)


def test_mix_known_gain():
    clean = Waveform(np.ones(4))
    noise = Waveform(np.array([2.0, -2.0, 2.0, -2.0]))
    mix, scaled, gain = mix_components(clean, noise, 0.0)
    assert gain == pytest.approx(0.5)
    np.testing.assert_allclose(mix.samples, [2.0, 0.0, 2.0, 0.0])


def test_mix_errors():
    ok = Waveform(np.ones(8))
    with pytest.raises(DegenerateInputError):
        mix_components(Waveform(np.zeros(8)), ok, 0.0)
    with pytest.raises(DegenerateInputError):
        mix_components(ok, Waveform(np.zeros(8)), 0.0)
    with pytest.raises(InvalidInputError):
        mix_components(ok, Waveform(np.ones(8), 8000), 0.0)


def test_fit_noise_tiles():
    out = fit_noise(Waveform(np.arange(3.0)), 7)
    np.testing.assert_array_equal(out.samples, [0, 1, 2, 0, 1, 2, 0])


def test_make_pair_deterministic_and_reassembles(corpus):
    entry = load_manifest(corpus)[0]
    a = make_pair(entry, 11, crop_seconds=0.25)
    b = make_pair(entry, 11, crop_seconds=0.25)
    c = make_pair(entry, 12, crop_seconds=0.25)
    assert np.array_equal(a.y.values, b.y.values) and a.snr_db == b.snr_db
    assert a.snr_db != c.snr_db
    assert -5 <= a.snr_db <= 5
    assert len(a.noisy) == 4000
    np.testing.assert_allclose(a.clean.samples + a.noise.samples, a.noisy.samples, atol=1e-10)
    assert np.max(np.abs(a.noisy.samples)) == pytest.approx(1.0)
    assert abs(measured_snr(a.clean, a.noise) - a.snr_db) < 1e-6
    m = a.oracle_mask.values
    assert m.shape == a.y.shape and m.min() >= 0 and m.max() <= 1


def test_make_pair_pads_short_clips(corpus):
    p = make_pair(load_manifest(corpus)[0], 0, crop_seconds=1.0)
    assert len(p.noisy) == 16000
    assert np.all(p.noisy.samples[9600:] == 0)


def test_collapsed_snr_range(tmp_path):
    m = write_synthetic_corpus(tmp_path, 1, 0.3, "2:2")
    entry = load_manifest(m)[0]
    assert entry.fixed_snr
    assert all(make_pair(entry, s, crop_seconds=None).snr_db == 2.0 for s in range(3))


def test_too_short_clip(tmp_path):
    write_wav(tmp_path / "c.wav", Waveform(np.ones(100)))
    write_wav(tmp_path / "n.wav", Waveform(np.ones(100)))
    (tmp_path / "m.csv").write_text("clean_path,noise_path,snr_db\nc.wav,n.wav,0\n")
    with pytest.raises(InvalidInputError):
        make_pair(load_manifest(tmp_path / "m.csv")[0], 0)


def test_epoch_order():
    a = epoch_order(10, 0, 0)
    assert sorted(a) == list(range(10))
    assert np.array_equal(a, epoch_order(10, 0, 0))
    assert not np.array_equal(a, epoch_order(10, 0, 1))
