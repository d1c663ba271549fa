"""Noisy waveform -> enhanced waveform.

normalize -> STFT -> compress -> mask net -> guidance -> reverse sampler
-> decompress -> iSTFT -> undo normalisation. The mask (hence the guidance)
is estimated once per utterance and reused at every reverse step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import SamplerConfig, run_reverse
from .errors import InvalidInputError
from .guidance import GuidanceField, Mask, guidance_from_mask, phase_sensitive_mask
from .nets import DenoiserCallable, cmen_forward
from .spectral import COMPRESSED, ComplexSpectrogram, Waveform, analyze, normalize, synthesize
from .train import Checkpoint, load_checkpoint


@dataclass
class EnhanceResult:
    enhanced: Waveform
    mask: Mask
    guidance: GuidanceField
    noisy_state: ComplexSpectrogram
    prior_state: ComplexSpectrogram
    final_state: ComplexSpectrogram
    steps_used: int
    seed: int


def _as_checkpoint(checkpoint):
    return checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint)


def _sample(y, mask, ck, cfg, n_samples, sample_rate, gain):
    g = guidance_from_mask(mask)
    den = DenoiserCallable(ck.denoiser)
    trajectory = []
    final = run_reverse(y, g, den, ck.schedule, cfg, np.random.default_rng(cfg.seed), trajectory)
    wave = synthesize(final, n_samples, ck.spectral_config)
    enhanced = Waveform(wave.samples * gain, sample_rate)
    prior = ComplexSpectrogram(trajectory[0].x, COMPRESSED, ck.spectral_config)
    return EnhanceResult(enhanced, mask, g, y, prior, final, den.calls, cfg.seed)


def _prepare(noisy, ck):
    if noisy.sample_rate != ck.spectral_config.sample_rate:
        raise InvalidInputError(
            f"sample rate {noisy.sample_rate} does not match model rate "
            f"{ck.spectral_config.sample_rate}; resample at load time")
    scaled, gain = normalize(noisy)
    return analyze(scaled, ck.spectral_config), gain


def enhance(noisy, checkpoint, cfg=None):
    cfg = cfg or SamplerConfig()
    ck = _as_checkpoint(checkpoint)
    y, gain = _prepare(noisy, ck)
    mask = cmen_forward(ck.cmen, y)
    return _sample(y, mask, ck, cfg, len(noisy), noisy.sample_rate, gain)


def enhance_with_oracle_mask(noisy, clean, checkpoint, cfg=None):
    """Like ``enhance`` but with the oracle phase-sensitive mask as guidance."""
    cfg = cfg or SamplerConfig()
    if len(clean) != len(noisy):
        raise InvalidInputError(f"clean has {len(clean)} samples, noisy has {len(noisy)}")
    ck = _as_checkpoint(checkpoint)
    y, gain = _prepare(noisy, ck)
    x0 = analyze(Waveform(clean.samples / gain, clean.sample_rate), ck.spectral_config)
    mask = phase_sensitive_mask(x0, y)
    return _sample(y, mask, ck, cfg, len(noisy), noisy.sample_rate, gain)
