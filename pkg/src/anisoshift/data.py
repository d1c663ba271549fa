"""Manifests, SNR mixing and training-pair assembly."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import DegenerateInputError, InvalidInputError, ManifestError
from .guidance import Mask, phase_sensitive_mask
from .spectral import SpectralConfig, Waveform, analyze, normalize, read_wav, write_wav

MANIFEST_HEADER = ("clean_path", "noise_path", "snr_db")


@dataclass(frozen=True)
class ManifestEntry:
    clean_path: Path
    noise_path: Path
    snr_db: tuple  # (lo, hi); lo == hi for a fixed SNR

    @property
    def item_id(self):
        return f"{self.clean_path.stem}+{self.noise_path.stem}"

    @property
    def fixed_snr(self):
        return self.snr_db[0] == self.snr_db[1]


@dataclass
class TrainPair:
    x0: object          # compressed ComplexSpectrogram of the clean target
    y: object           # compressed ComplexSpectrogram of the mixture
    oracle_mask: Mask
    snr_db: float
    clean: Waveform
    noise: Waveform     # scaled noise realisation: noisy = clean + noise
    noisy: Waveform
    item_id: str = ""


def parse_snr(text):
    text = text.strip()
    if ":" in text:
        lo, hi = (float(v) for v in text.split(":", 1))
    else:
        lo = hi = float(text)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("SNR must be finite")
    if lo > hi:
        raise ValueError(f"SNR range {lo}:{hi} has lo > hi")
    return lo, hi


def load_manifest(path):
    """Read a ``clean_path,noise_path,snr_db`` CSV. Relative paths resolve
    against the manifest's directory; errors carry the file line number."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return entries
        if tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise ManifestError(f"expected header {','.join(MANIFEST_HEADER)}", row=1)
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ManifestError(f"expected 3 fields, got {len(row)}", row=line_no)
            clean, noise, snr = (c.strip() for c in row)
            try:
                snr_range = parse_snr(snr)
            except ValueError as exc:
                raise ManifestError(f"bad snr_db {snr!r}: {exc}", row=line_no) from None
            paths = []
            for p in (clean, noise):
                p = Path(p)
                if not p.is_absolute():
                    p = base / p
                if not p.is_file():
                    raise ManifestError(f"unresolvable path {p}", row=line_no)
                paths.append(p)
            entries.append(ManifestEntry(paths[0], paths[1], snr_range))
    return entries


def write_manifest(path, rows):
    """rows: iterables of (clean_path, noise_path, snr) with snr a number or 'lo:hi'."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_HEADER)
        for clean, noise, snr in rows:
            w.writerow([str(clean), str(noise), snr])


def _power(x):
    return float(np.mean(np.square(x)))


def fit_noise(noise, length, rng=None):
    """Tile noise up to ``length`` samples, then crop (randomly if rng given)."""
    x = noise.samples
    if x.size == 0:
        raise DegenerateInputError("empty noise")
    if x.size < length:
        x = np.tile(x, int(math.ceil(length / x.size)))
    extra = x.size - length
    off = int(rng.integers(0, extra + 1)) if (rng is not None and extra > 0) else 0
    return Waveform(x[off:off + length], noise.sample_rate)


def mix_components(clean, noise, snr_db, rng=None):
    """Return (mixture, scaled_noise, gain) with clean/scaled-noise power ratio = snr_db."""
    if clean.sample_rate != noise.sample_rate:
        raise InvalidInputError(
            f"sample rate mismatch: {clean.sample_rate} vs {noise.sample_rate}")
    noise = fit_noise(noise, len(clean), rng)
    p_clean, p_noise = _power(clean.samples), _power(noise.samples)
    if p_clean == 0:
        raise DegenerateInputError("clean signal is silent")
    if p_noise == 0:
        raise DegenerateInputError("noise signal is silent")
    gain = math.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    scaled = noise.samples * gain
    return (Waveform(clean.samples + scaled, clean.sample_rate),
            Waveform(scaled, clean.sample_rate), gain)


def mix_at_snr(clean, noise, snr_db, rng=None):
    return mix_components(clean, noise, snr_db, rng)[0]


def measured_snr(clean, noise):
    return 10.0 * math.log10(_power(clean.samples) / _power(noise.samples))


def make_pair(entry, seed, cfg=None, crop_seconds=4.0):
    """Build a training pair; a pure function of (entry, seed, cfg, crop).

    ``crop_seconds=None`` keeps the full clip. Clips shorter than the crop
    are used whole and zero-padded after mixing.
    """
    cfg = cfg or SpectralConfig()
    rng = np.random.default_rng(seed)
    clean = read_wav(entry.clean_path, cfg.sample_rate)
    noise = read_wav(entry.noise_path, cfg.sample_rate)

    crop = None if crop_seconds is None else int(round(crop_seconds * cfg.sample_rate))
    x = clean.samples
    if crop is not None and x.size > crop:
        off = int(rng.integers(0, x.size - crop + 1))
        x = x[off:off + crop]
    if x.size < cfg.fft_size:
        raise InvalidInputError(f"{entry.clean_path}: clip shorter than one frame")
    clean = Waveform(x, cfg.sample_rate)

    lo, hi = entry.snr_db
    snr = lo if lo == hi else float(rng.uniform(lo, hi))
    noisy, scaled, _ = mix_components(clean, noise, snr, rng)

    noisy, peak = normalize(noisy)
    clean_n = clean.samples / peak
    noise_n = scaled.samples / peak
    noisy_n = noisy.samples
    if crop is not None and clean_n.size < crop:
        pad = (0, crop - clean_n.size)
        clean_n, noise_n, noisy_n = (np.pad(a, pad) for a in (clean_n, noise_n, noisy_n))

    clean_w = Waveform(clean_n, cfg.sample_rate)
    noisy_w = Waveform(noisy_n, cfg.sample_rate)
    x0 = analyze(clean_w, cfg)
    y = analyze(noisy_w, cfg)
    return TrainPair(
        x0=x0, y=y, oracle_mask=phase_sensitive_mask(x0, y), snr_db=snr,
        clean=clean_w, noise=Waveform(noise_n, cfg.sample_rate), noisy=noisy_w,
        item_id=entry.item_id,
    )


def epoch_order(n_items, seed, epoch):
    """Seeded permutation of item indices for one epoch."""
    rng = np.random.default_rng([seed, epoch])
    return rng.permutation(n_items)


# -- synthetic material for smoke tests and demos -------------------------

def synthetic_speech(duration, sample_rate=16000, rng=None, f0=None):
    """Voiced, harmonic, syllable-modulated tone: a crude speech stand-in."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = f0 if f0 is not None else rng.uniform(110.0, 220.0)
    vib = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t)
    phase = 2 * np.pi * np.cumsum(f0 * vib) / sample_rate
    x = np.zeros(n)
    for k in range(1, int(3000 // f0) + 1):
        x += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    env = 0.5 * (1 - np.cos(2 * np.pi * rng.uniform(2.5, 4.5) * t + rng.uniform(0, 2 * np.pi)))
    x *= env ** 1.5
    return Waveform(0.5 * x / np.max(np.abs(x)), sample_rate)


def synthetic_noise(duration, sample_rate=16000, rng=None, band=(1500.0, 6000.0)):
    """Band-pass filtered white noise."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = int(round(duration * sample_rate))
    sos = signal.butter(4, band, btype="bandpass", fs=sample_rate, output="sos")
    x = signal.sosfilt(sos, rng.standard_normal(n))
    return Waveform(0.5 * x / np.max(np.abs(x)), sample_rate)


def write_synthetic_corpus(out_dir, n_items=4, duration=1.0, snr_db=0.0, seed=0,
                           sample_rate=16000):
    """Write ``n_items`` clean/noise WAV pairs plus ``manifest.csv``; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_items):
        clean = synthetic_speech(duration, sample_rate, rng)
        noise = synthetic_noise(duration, sample_rate, rng)
        cp, npath = out_dir / f"clean_{i:03d}.wav", out_dir / f"noise_{i:03d}.wav"
        write_wav(cp, clean)
        write_wav(npath, noise)
        rows.append((cp.name, npath.name, snr_db))
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
