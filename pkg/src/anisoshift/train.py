"""Joint training of the mask net and the denoiser, plus checkpoint I/O.

Per item and step, one timestep is drawn uniformly from 1..T. The mask net
output defines the guidance used to corrupt x0, but that guidance is
detached: the denoiser's loss never sends gradient into the mask net.
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import epoch_order, load_manifest, make_pair
from .diffusion import ANISOTROPIC, GUIDANCE_MODES, ISOTROPIC, NONE
from .errors import (
    CheckpointError,
    ConfigMismatchError,
    CorruptCheckpointError,
    NumericalError,
)
from .nets import NetConfig, build_nets, count_params
from .schedule import build_geometric_schedule
from .spectral import SpectralConfig

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 15
    learning_rate: float = 1e-4
    steps: int = 1000
    seed: int = 0
    diffusion_weight: float = 1.0
    cmen_weight: float = 1.0
    crop_seconds: float | None = 4.0
    checkpoint_every: int = 0
    guidance_mode: str = ANISOTROPIC
    deterministic: bool = True

    def __post_init__(self):
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.guidance_mode not in GUIDANCE_MODES:
            raise ValueError(f"guidance_mode must be one of {GUIDANCE_MODES}")

    @classmethod
    def desk(cls, **kw):
        kw = {"batch_size": 4, "learning_rate": 2e-4, "crop_seconds": None, **kw}
        return cls(**kw)


@dataclass
class LossReport:
    diffusion_loss: float
    cmen_loss: float
    total: float
    t_drawn: list = field(default_factory=list)


@dataclass
class Batch:
    x0: torch.Tensor     # complex (B, K, F)
    y: torch.Tensor
    snr_db: list
    item_ids: list


def collate(pairs, dtype=torch.complex64):
    """Stack pairs into a batch, zero-padding frames to the longest item."""
    k = max(p.y.shape[0] for p in pairs)

    def stack(attr):
        out = []
        for p in pairs:
            v = getattr(p, attr).values
            if v.shape[0] < k:
                v = np.pad(v, ((0, k - v.shape[0]), (0, 0)))
            out.append(v)
        return torch.as_tensor(np.stack(out)).to(dtype)

    return Batch(stack("x0"), stack("y"), [p.snr_db for p in pairs], [p.item_id for p in pairs])


def complex_normal_like(x, generator):
    re = torch.randn(x.shape, generator=generator, dtype=x.real.dtype)
    im = torch.randn(x.shape, generator=generator, dtype=x.real.dtype)
    return torch.complex(re, im) * math.sqrt(0.5)


def sample_timesteps(generator, n, T):
    return torch.randint(1, T + 1, (n,), generator=generator)


def sampling_field(g, mode):
    if mode == ISOTROPIC:
        return torch.ones_like(g)
    if mode == NONE:
        return torch.zeros_like(g)
    return g


def compute_losses(cmen, den, x0, y, sch, t, z, guidance_mode=ANISOTROPIC, isolate=True,
                   guidance=None):
    """Both loss terms for fixed timesteps ``t`` (B,) and noise ``z``.

    Returns ``(diffusion_loss, cmen_loss, g)``. Passing ``guidance`` replaces
    the (detached) mask-net guidance in the diffusion term. ``isolate=False``
    exists only so tests can show the isolation check has teeth.
    """
    mask = cmen(y)
    cmen_loss = torch.mean(torch.abs(mask * y - x0) ** 2)

    if guidance is not None:
        g = guidance
    else:
        g = 1.0 - (mask.detach() if isolate else mask)
    abar = torch.as_tensor(np.array(sch.alpha_bar), dtype=g.dtype)[t][:, None, None]
    std = sch.kappa * torch.sqrt(abar)
    x_t = (1.0 - abar) * x0 + abar * y + (std * sampling_field(g, guidance_mode)) * z
    diffusion_loss = torch.mean(torch.abs(den(x_t, y, g, t) - x0) ** 2)
    return diffusion_loss, cmen_loss, g


def training_step(cmen, den, optimizer, batch, sch, generator, cfg=None):
    """One joint update. Mutates the networks and optimizer; returns a LossReport."""
    cfg = cfg or TrainConfig()
    cmen.train()
    den.train()
    t = sample_timesteps(generator, batch.y.shape[0], sch.T)
    z = complex_normal_like(batch.y, generator)
    diff, cm, _ = compute_losses(cmen, den, batch.x0, batch.y, sch, t, z, cfg.guidance_mode)
    if not (torch.isfinite(diff) and torch.isfinite(cm)):
        raise NumericalError(
            f"non-finite loss (diffusion={diff.item()}, cmen={cm.item()}) "
            f"t={t.tolist()} snr={batch.snr_db} items={batch.item_ids}"
        )
    total = cfg.diffusion_weight * diff + cfg.cmen_weight * cm
    optimizer.zero_grad(set_to_none=False)
    total.backward()
    optimizer.step()
    return LossReport(diff.item(), cm.item(), diff.item() + cm.item(), t.tolist())


def make_optimizer(cmen, den, lr):
    return torch.optim.Adam(list(den.parameters()) + list(cmen.parameters()), lr=lr)


@contextlib.contextmanager
def single_threaded(enabled=True):
    if not enabled:
        yield
        return
    prev = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        yield
    finally:
        torch.set_num_threads(prev)


# -- checkpoints -----------------------------------------------------------

@dataclass
class Checkpoint:
    cmen: torch.nn.Module
    denoiser: torch.nn.Module
    net_config: NetConfig
    spectral_config: SpectralConfig
    schedule: object
    step: int = 0
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, cmen, den, net_cfg, spectral_cfg, sch, step=0, extra=None):
    payload = {
        "format_version": FORMAT_VERSION,
        "net_config": net_cfg.as_dict(),
        "spectral_config": spectral_cfg.as_dict(),
        "schedule": sch.settings(),
        "step": int(step),
        "extra": extra or {},
        "cmen": cmen.state_dict(),
        "denoiser": den.state_dict(),
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_checkpoint(path, spectral_cfg=None, schedule=None, override=False):
    """Load a checkpoint, refusing spectral/schedule settings that disagree with
    the requested ones unless ``override`` is set."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CorruptCheckpointError(f"cannot decode {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CorruptCheckpointError(f"{path} is not a checkpoint")
    if payload["format_version"] != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {payload['format_version']} (want {FORMAT_VERSION})")
    try:
        net_cfg = NetConfig(**payload["net_config"])
        spec = SpectralConfig(**payload["spectral_config"])
        sch = build_geometric_schedule(**payload["schedule"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"{path}: bad config block: {exc}") from exc

    if not override:
        if spectral_cfg is not None and spectral_cfg != spec:
            raise ConfigMismatchError(
                f"spectral config mismatch: checkpoint {spec.as_dict()} vs requested {spectral_cfg.as_dict()}")
        if schedule is not None:
            want = schedule.settings() if hasattr(schedule, "settings") else dict(schedule)
            if want != sch.settings():
                raise ConfigMismatchError(
                    f"schedule mismatch: checkpoint {sch.settings()} vs requested {want}")

    cmen, den = build_nets(net_cfg)
    try:
        cmen.load_state_dict(payload["cmen"])
        den.load_state_dict(payload["denoiser"])
    except (KeyError, RuntimeError) as exc:
        raise CorruptCheckpointError(f"{path}: parameter block does not match config: {exc}") from exc
    cmen.eval()
    den.eval()
    return Checkpoint(cmen, den, net_cfg, spec, sch, payload.get("step", 0), payload.get("extra", {}))


# -- loop --------------------------------------------------------------------

def _pair_seed(seed, epoch, index):
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


def train_loop(cfg, manifest, out_dir, net_cfg=None, spectral_cfg=None, schedule=None,
               init_checkpoint=None):
    """Train from a manifest; returns the final checkpoint path.

    Writes ``loss_log.jsonl`` (one JSON object per step), optional periodic
    ``checkpoint_<step>.pt`` files and the final ``checkpoint.pt``.
    """
    net_cfg = net_cfg or NetConfig.paper()
    spectral_cfg = spectral_cfg or SpectralConfig()
    sch = schedule or build_geometric_schedule()
    if net_cfg.T != sch.T:
        net_cfg = dataclasses.replace(net_cfg, T=sch.T)
    entries = manifest if isinstance(manifest, list) else load_manifest(manifest)
    if not entries:
        raise ValueError("manifest is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if init_checkpoint is not None:
        ck = load_checkpoint(init_checkpoint, spectral_cfg, sch)
        cmen, den = ck.cmen, ck.denoiser
    else:
        cmen, den = build_nets(net_cfg, seed=cfg.seed)
    optimizer = make_optimizer(cmen, den, cfg.learning_rate)
    generator = torch.Generator().manual_seed(cfg.seed)
    extra = {"train_config": dataclasses.asdict(cfg)}
    log.info("denoiser %d params, mask net %d params", count_params(den), count_params(cmen))

    final = out_dir / "checkpoint.pt"
    log_path = out_dir / "loss_log.jsonl"
    with single_threaded(cfg.deterministic), open(log_path, "w") as log_fh:
        if cfg.steps == 0:
            return save_checkpoint(final, cmen, den, net_cfg, spectral_cfg, sch, 0, extra)
        order, epoch, cursor = epoch_order(len(entries), cfg.seed, 0), 0, 0
        for step in range(1, cfg.steps + 1):
            pairs = []
            while len(pairs) < cfg.batch_size:
                if cursor == len(order):
                    epoch += 1
                    order, cursor = epoch_order(len(entries), cfg.seed, epoch), 0
                idx = int(order[cursor])
                pairs.append(make_pair(entries[idx], _pair_seed(cfg.seed, epoch, idx),
                                       spectral_cfg, cfg.crop_seconds))
                cursor += 1
            report = training_step(cmen, den, optimizer, collate(pairs), sch, generator, cfg)
            log_fh.write(json.dumps({
                "step": step,
                "diffusion_loss": report.diffusion_loss,
                "cmen_loss": report.cmen_loss,
                "total": report.total,
                "t": report.t_drawn,
            }) + "\n")
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0 and step < cfg.steps:
                save_checkpoint(out_dir / f"checkpoint_{step}.pt", cmen, den, net_cfg,
                                spectral_cfg, sch, step, extra)
        return save_checkpoint(final, cmen, den, net_cfg, spectral_cfg, sch, cfg.steps, extra)
