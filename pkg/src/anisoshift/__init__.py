"""Guided anisotropic residual-shift diffusion for speech enhancement."""

from .diffusion import SamplerConfig, run_reverse
from .enhance import enhance, enhance_with_oracle_mask
from .guidance import guidance_from_mask, phase_sensitive_mask
from .schedule import build_geometric_schedule
from .spectral import SpectralConfig, Waveform, analyze, synthesize

__version__ = "0.1.0"

__all__ = [
    "SamplerConfig",
    "SpectralConfig",
    "Waveform",
    "analyze",
    "build_geometric_schedule",
    "enhance",
    "enhance_with_oracle_mask",
    "guidance_from_mask",
    "phase_sensitive_mask",
    "run_reverse",
    "synthesize",
]
