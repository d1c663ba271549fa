"""Run configuration file (TOML).

Keys may sit at top level or inside any single-level table (``[schedule]``,
``[train]``, ...); tables are flattened and unknown keys are rejected.
Precedence: CLI flag > file > built-in defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .diffusion import SamplerConfig
from .nets import NetConfig
from .schedule import build_geometric_schedule
from .spectral import SpectralConfig
from .train import TrainConfig

NET_PRESETS = {"paper": NetConfig.paper, "desk": NetConfig.desk, "toy": NetConfig.toy}


@dataclass(frozen=True)
class RunConfig:
    sample_rate: int = 16000
    fft_size: int = 510
    hop: int = 128
    comp_exponent: float = 0.5
    comp_scale: float = 0.5
    T: int = 6
    kappa: float = 0.5
    p: float = 0.3
    alpha_bar_1: float = 0.001
    alpha_bar_T: float = 0.999
    guidance_mode: str = "anisotropic"
    variance_mode: str = "paper"
    prior_std: str = "paper"
    noise_free: bool = False
    seed: int = 0
    batch_size: int = 15
    learning_rate: float = 1e-4
    steps: int = 1000
    crop_seconds: float = 4.0
    checkpoint_every: int = 0
    net_preset: str = "paper"

    def __post_init__(self):
        if self.net_preset not in NET_PRESETS:
            raise ValueError(f"net_preset must be one of {sorted(NET_PRESETS)}")

    def spectral(self):
        return SpectralConfig(fft_size=self.fft_size, hop=self.hop,
                              comp_exponent=self.comp_exponent, comp_scale=self.comp_scale,
                              sample_rate=self.sample_rate)

    def schedule(self):
        return build_geometric_schedule(self.T, self.alpha_bar_1, self.alpha_bar_T, self.p, self.kappa)

    def sampler(self):
        return SamplerConfig(self.guidance_mode, self.variance_mode, self.noise_free,
                             self.seed, self.prior_std)

    def train(self):
        crop = self.crop_seconds if self.crop_seconds and self.crop_seconds > 0 else None
        return TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
                           steps=self.steps, seed=self.seed, crop_seconds=crop,
                           checkpoint_every=self.checkpoint_every,
                           guidance_mode=self.guidance_mode)

    def net(self):
        return dataclasses.replace(NET_PRESETS[self.net_preset](), T=self.T)

    def as_dict(self):
        return dataclasses.asdict(self)


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name, value):
    typ = FIELDS[name].type
    if typ == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"{name} must be a boolean")
        return value
    if typ == "int":
        if isinstance(value, bool) or int(value) != value:
            raise ValueError(f"{name} must be an integer")
        return int(value)
    if typ == "float":
        return float(value)
    return str(value)


def from_mapping(data, base=None):
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            for k, v in value.items():
                flat[k] = v
        else:
            flat[key] = value
    unknown = sorted(set(flat) - set(FIELDS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    values = {k: _coerce(k, v) for k, v in flat.items()}
    return dataclasses.replace(base or RunConfig(), **values)


def load_run_config(path=None):
    if path is None:
        return RunConfig()
    with open(path, "rb") as fh:
        return from_mapping(tomllib.load(fh))


def with_overrides(cfg, **overrides):
    """Apply CLI overrides; ``None`` means "not given"."""
    given = {k: v for k, v in overrides.items() if v is not None}
    return from_mapping(given, cfg) if given else cfg
