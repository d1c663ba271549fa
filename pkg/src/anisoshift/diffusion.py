"""Anisotropic residual-shift diffusion: forward kernels, prior and reverse sampling.

States live on the compressed ``(K, F)`` complex grid. Complex noise is
circularly symmetric with unit total variance: real and imaginary parts are
independent N(0, 1/2), so ``Var(c * z) = c**2`` per bin.

Every stochastic function takes an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InvalidInputError, NumericalError
from .guidance import GuidanceField
from .schedule import PAPER, VARIANCE_MODES
from .spectral import COMPRESSED, ComplexSpectrogram

ANISOTROPIC = "anisotropic"
ISOTROPIC = "isotropic"
NONE = "none"
GUIDANCE_MODES = (ANISOTROPIC, ISOTROPIC, NONE)

PRIOR_PAPER = "paper"
PRIOR_MARGINAL = "marginal"


@dataclass(frozen=True)
class SamplerConfig:
    guidance_mode: str = ANISOTROPIC
    variance_mode: str = PAPER
    noise_free: bool = False
    seed: int = 0
    prior_std: str = PRIOR_PAPER

    def __post_init__(self):
        if self.guidance_mode not in GUIDANCE_MODES:
            raise ValueError(f"guidance_mode must be one of {GUIDANCE_MODES}")
        if self.variance_mode not in VARIANCE_MODES:
            raise ValueError(f"variance_mode must be one of {VARIANCE_MODES}")
        if self.prior_std not in (PRIOR_PAPER, PRIOR_MARGINAL):
            raise ValueError("prior_std must be 'paper' or 'marginal'")

    @property
    def deterministic(self):
        return self.noise_free or self.guidance_mode == NONE


@dataclass
class DiffusionState:
    x: np.ndarray
    t: int


def _arr(a):
    if isinstance(a, (ComplexSpectrogram, GuidanceField)):
        return a.values
    return np.asarray(a)


def _same_shape(*arrays):
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise InvalidInputError(f"shape mismatch {a.shape} vs {shape}")


def complex_normal(rng, shape):
    """Draw z ~ CN(0, I): independent N(0, 1/2) real and imaginary parts."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * math.sqrt(0.5)


def noise_field(g, cfg):
    """Per-bin noise multiplier actually used for sampling under ``cfg``.

    The denoiser always sees the estimated guidance; only the injected noise
    follows the ablation mode.
    """
    g = _arr(g)
    if cfg.deterministic:
        return np.zeros(g.shape)
    if cfg.guidance_mode == ISOTROPIC:
        return np.ones(g.shape)
    return g


def forward_step(x_prev, x0, y, g, sch, t, rng):
    """One forward transition: x_{t-1} + alpha_t (y - x0) + kappa sqrt(alpha_t) g z."""
    x_prev, x0, y, g = map(_arr, (x_prev, x0, y, g))
    _same_shape(x_prev, x0, y, g)
    sch.check_t(t)
    std = sch.kappa * math.sqrt(sch.alpha[t])
    return x_prev + sch.alpha[t] * (y - x0) + (std * g) * complex_normal(rng, g.shape)


def forward_marginal_sample(x0, y, g, sch, t, rng):
    """Sample x_t directly: mean (1 - abar_t) x0 + abar_t y, std kappa sqrt(abar_t) g."""
    x0, y, g = map(_arr, (x0, y, g))
    _same_shape(x0, y, g)
    sch.check_t(t)
    abar = sch.alpha_bar[t]
    mean = (1.0 - abar) * x0 + abar * y
    return mean + (sch.marginal_std_coeff(t) * g) * complex_normal(rng, g.shape)


def prior_std_coeff(sch, cfg):
    if cfg.prior_std == PRIOR_MARGINAL:
        return sch.marginal_std_coeff(sch.T)
    return sch.reverse_std_coeff(sch.T, cfg.variance_mode)


def sample_prior(y, g, sch, cfg, rng):
    """x_T = y + coeff * g * z with ``g`` already mapped through ``noise_field``."""
    y, g = _arr(y), _arr(g)
    _same_shape(y, g)
    if cfg.deterministic:
        return y.copy()
    return y + (prior_std_coeff(sch, cfg) * g) * complex_normal(rng, g.shape)


def reverse_step(x_t, x0_hat, g, sch, t, cfg, rng):
    """x_{t-1} = (1 - beta_t) x_t + beta_t x0_hat + coeff_t g z.

    ``g`` is the sampling noise field (see ``noise_field``). At t = 1 the
    result is ``x0_hat`` exactly.
    """
    x_t, x0_hat, g = map(_arr, (x_t, x0_hat, g))
    _same_shape(x_t, x0_hat, g)
    sch.check_t(t)
    if t == 1:
        return x0_hat.copy()
    b = sch.beta[t]
    mean = (1.0 - b) * x_t + b * x0_hat
    if cfg.deterministic:
        return mean
    coeff = sch.reverse_std_coeff(t, cfg.variance_mode)
    return mean + (coeff * g) * complex_normal(rng, g.shape)


def run_reverse(y, g, denoiser, sch, cfg, rng=None, trajectory=None):
    """Full sampler: prior, then T denoiser calls and reverse steps down to t = 0.

    ``denoiser(x_t, y, g, t)`` must return an array shaped like ``x_t``; it
    receives the estimated guidance ``g`` whatever the ablation mode. When
    ``trajectory`` is a list, every visited ``DiffusionState`` (x_T first)
    is appended to it.
    """
    spec = y if isinstance(y, ComplexSpectrogram) else None
    y_arr, g_arr = _arr(y), _arr(g)
    _same_shape(y_arr, g_arr)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    sampling_g = noise_field(g_arr, cfg)

    x = sample_prior(y_arr, sampling_g, sch, cfg, rng)
    if trajectory is not None:
        trajectory.append(DiffusionState(x, sch.T))
    for t in range(sch.T, 0, -1):
        x0_hat = np.asarray(denoiser(x, y_arr, g_arr, t))
        if x0_hat.shape != x.shape:
            raise ContractError(f"denoiser returned shape {x0_hat.shape}, expected {x.shape}")
        if not np.all(np.isfinite(x0_hat)):
            raise NumericalError(f"denoiser produced non-finite values at t={t}")
        x = reverse_step(x, x0_hat, sampling_g, sch, t, cfg, rng)
        if trajectory is not None:
            trajectory.append(DiffusionState(x, t - 1))

    if spec is not None:
        return ComplexSpectrogram(x, COMPRESSED, spec.config)
    return x
