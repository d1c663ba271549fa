"""Waveform <-> compressed complex spectrogram transforms.

All diffusion arithmetic happens on the compressed spectrogram produced by
``compress(stft(w))``. Spectrograms are stored frames-first, shape ``(K, F)``
with ``F = fft_size // 2 + 1``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DomainTagError,
    InvalidInputError,
    NumericalError,
)

RAW = "raw"
COMPRESSED = "compressed"


@dataclass(frozen=True)
class SpectralConfig:
    fft_size: int = 510
    hop: int = 128
    window: str = "hann"
    comp_exponent: float = 0.5
    comp_scale: float = 0.5
    center_pad: bool = True
    sample_rate: int = 16000

    def __post_init__(self):
        if self.fft_size <= 0:
            raise ConfigurationError("fft_size", "must be positive")
        if not 0 < self.hop <= self.fft_size:
            raise ConfigurationError("hop", "must satisfy 0 < hop <= fft_size")
        if not 0 < self.comp_exponent <= 1:
            raise ConfigurationError("comp_exponent", "must lie in (0, 1]")
        if self.comp_scale <= 0:
            raise ConfigurationError("comp_scale", "must be positive")
        if self.sample_rate <= 0:
            raise ConfigurationError("sample_rate", "must be positive")
        if self.window not in _WINDOWS:
            raise ConfigurationError("window", f"unknown window {self.window!r}")

    @property
    def n_bins(self):
        return self.fft_size // 2 + 1

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidInputError("waveform must be mono (1-D)")
        if self.sample_rate <= 0:
            raise InvalidInputError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidInputError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.shape[0]


@dataclass
class ComplexSpectrogram:
    values: np.ndarray
    domain: str = RAW
    config: SpectralConfig = field(default_factory=SpectralConfig)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.domain not in (RAW, COMPRESSED):
            raise DomainTagError(f"unknown domain tag {self.domain!r}")
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise InvalidInputError(f"expected a (K, F) grid, got {self.values.shape}")
        if self.values.shape[1] != self.config.n_bins:
            raise InvalidInputError(
                f"expected F={self.config.n_bins} bins, got {self.values.shape[1]}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("spectrogram contains non-finite values")

    @property
    def shape(self):
        return self.values.shape


def _hann(n):
    # periodic Hann
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


_WINDOWS = {"hann": _hann}


def get_window(cfg):
    return _WINDOWS[cfg.window](cfg.fft_size)


def n_frames(length, cfg):
    if cfg.center_pad:
        return 1 + length // cfg.hop
    return 1 + (length - cfg.fft_size) // cfg.hop


def stft(w, cfg=None):
    """Short-time Fourier transform, returning a raw ``(K, F)`` spectrogram."""
    cfg = cfg or SpectralConfig()
    x = w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)
    if x.size == 0:
        raise InvalidInputError("empty waveform")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("waveform contains non-finite samples")
    n_fft, hop = cfg.fft_size, cfg.hop
    if cfg.center_pad:
        pad = n_fft // 2
        # numpy's reflect mode re-reflects for signals shorter than the pad
        x = np.pad(x, pad, mode="reflect" if x.size > 1 else "constant")
    elif x.size < n_fft:
        raise InvalidInputError("waveform shorter than one frame without center padding")
    k = 1 + (x.size - n_fft) // hop
    frames = np.lib.stride_tricks.as_strided(
        x, shape=(k, n_fft), strides=(x.strides[0] * hop, x.strides[0]), writeable=False
    )
    spec = np.fft.rfft(frames * get_window(cfg), axis=-1)
    return ComplexSpectrogram(spec, RAW, cfg)


def istft(s, cfg=None, out_len=None):
    """Least-squares inverse STFT (weighted overlap-add)."""
    cfg = cfg or s.config
    if s.domain != RAW:
        raise DomainTagError("istft expects a raw spectrogram; decompress first")
    n_fft, hop = cfg.fft_size, cfg.hop
    k = s.shape[0]
    win = get_window(cfg)
    frames = np.fft.irfft(s.values, n=n_fft, axis=-1) * win
    total = n_fft + hop * (k - 1)
    out = np.zeros(total)
    norm = np.zeros(total)
    for i in range(k):
        out[i * hop:i * hop + n_fft] += frames[i]
        norm[i * hop:i * hop + n_fft] += win ** 2

    start = n_fft // 2 if cfg.center_pad else 0
    if out_len is None:
        out_len = hop * (k - 1) if cfg.center_pad else total
    if abs(n_frames(out_len, cfg) - k) > 1:
        raise InvalidInputError(f"out_len={out_len} inconsistent with {k} frames")
    stop = min(start + out_len, total)
    norm = norm[start:stop]
    if np.any(norm < 1e-10):
        raise NumericalError("synthesis window normalisation vanishes at some sample")
    y = out[start:stop] / norm
    if y.size < out_len:
        y = np.pad(y, (0, out_len - y.size))
    return Waveform(y, cfg.sample_rate)


def compress(s, cfg=None):
    """Magnitude compression ``beta * |s|**gamma`` with the phase kept."""
    cfg = cfg or s.config
    if s.domain != RAW:
        raise DomainTagError("spectrogram is already compressed")
    return ComplexSpectrogram(_rescale(s.values, cfg.comp_exponent, cfg.comp_scale),
                              COMPRESSED, cfg)


def _rescale(v, exponent, scale):
    # v * (scale * |v|**(exponent - 1)): a positive real factor per bin keeps
    # the phase to within an ulp; zero bins stay zero
    mag = np.abs(v)
    nz = mag > 0
    factor = np.zeros(v.shape)
    factor[nz] = scale * mag[nz] ** (exponent - 1.0)
    return v * factor


def decompress(c, cfg=None):
    cfg = cfg or c.config
    if c.domain != COMPRESSED:
        raise DomainTagError("spectrogram is not compressed")
    inv = 1.0 / cfg.comp_exponent
    out = _rescale(c.values, inv, cfg.comp_scale ** -inv)
    return ComplexSpectrogram(out, RAW, cfg)


def normalize(w):
    """Scale to unit peak. Returns the scaled waveform and the gain restoring it."""
    peak = np.max(np.abs(w.samples)) if len(w) else 0.0
    if peak == 0:
        raise DegenerateInputError("cannot normalise an all-zero waveform")
    return Waveform(w.samples / peak, w.sample_rate), float(peak)


def analyze(w, cfg=None):
    """Waveform -> compressed spectrogram."""
    return compress(stft(w, cfg), cfg)


def synthesize(c, out_len, cfg=None):
    """Compressed spectrogram -> waveform of ``out_len`` samples."""
    return istft(decompress(c, cfg), cfg, out_len)


def read_wav(path, sample_rate=None):
    """Read a mono WAV as float64 in [-1, 1], optionally resampling."""
    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if data.ndim > 1:
        if data.shape[1] != 1:
            raise InvalidInputError(f"{path}: only mono audio is supported")
        data = data[:, 0]
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif np.issubdtype(data.dtype, np.floating):
        x = data.astype(np.float64)
    else:
        raise InvalidInputError(f"{path}: unsupported sample format {data.dtype}")
    if sample_rate is not None and rate != sample_rate:
        g = np.gcd(int(rate), int(sample_rate))
        x = resample_poly(x, sample_rate // g, rate // g)
        rate = sample_rate
    return Waveform(x, int(rate))


def write_wav(path, w, subtype="float"):
    if subtype == "pcm16":
        data = (np.clip(w.samples, -1.0, 1.0 - 1.0 / 32768) * 32768.0).astype(np.int16)
    else:
        data = w.samples.astype(np.float32)
    wavfile.write(path, w.sample_rate, data)
