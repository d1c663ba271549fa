"""Trainable components: the coarse mask estimator and the x0 denoiser.

Both are small convolutional UNets over the ``(K, F)`` grid. Complex
spectrograms enter as stacked real planes:

* mask net:  (Re y, Im y)                       -> mask in (0, 1)
* denoiser:  (Re x_t, Im x_t, Re y, Im y, g) + t -> (Re x0, Im x0)

Only the I/O contract matters to the rest of the package; widths and depths
come from ``NetConfig``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ContractError, InvalidInputError, NumericalError
from .guidance import Mask


@dataclass(frozen=True)
class NetConfig:
    base_width: int = 32
    ch_mult: tuple = (1, 1, 2, 2, 2, 2, 2)
    num_res_blocks: int = 2
    emb_dim: int = 128
    cmen_width: int = 11
    cmen_levels: int = 5
    T: int = 6

    def __post_init__(self):
        object.__setattr__(self, "ch_mult", tuple(int(m) for m in self.ch_mult))
        for name in ("base_width", "num_res_blocks", "emb_dim", "cmen_width", "cmen_levels", "T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"NetConfig.{name} must be positive")
        if not self.ch_mult or min(self.ch_mult) <= 0:
            raise ValueError("NetConfig.ch_mult must be non-empty and positive")

    @classmethod
    def paper(cls):
        """Full scale: ~3.6M denoiser + ~0.9M mask net parameters."""
        return cls()

    @classmethod
    def desk(cls):
        """CPU-friendly scale, under 1e5 parameters in total."""
        return cls(base_width=8, ch_mult=(1, 2, 2), num_res_blocks=1, emb_dim=32,
                   cmen_width=6, cmen_levels=3)

    @classmethod
    def toy(cls):
        return cls(base_width=4, ch_mult=(1, 2), num_res_blocks=1, emb_dim=8,
                   cmen_width=4, cmen_levels=2)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["ch_mult"] = list(self.ch_mult)
        return d


def _groups(ch):
    for g in (8, 4, 2):
        if ch % g == 0 and ch // g >= 1:
            return g
    return 1


def timestep_embedding(t, T, dim):
    """Sinusoidal embedding of the normalised step t / T, shape (B, dim)."""
    t = torch.as_tensor(t, dtype=torch.get_default_dtype()).reshape(-1)
    pos = t / T * 1000.0
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=pos.dtype) / max(half, 1))
    args = pos[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class ResBlock(nn.Module):
    def __init__(self, in_ch, out_ch, emb_dim):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.emb = nn.Linear(emb_dim, out_ch)
        self.norm2 = nn.GroupNorm(_groups(out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.emb(emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


def _pad_to_multiple(x, m):
    k, f = x.shape[-2:]
    pk, pf = (-k) % m, (-f) % m
    if pk or pf:
        x = F.pad(x, (0, pf, 0, pk))
    return x, (k, f)


class Denoiser(nn.Module):
    """UNet predicting x0 from (x_t, y, g, t).

    The estimate is formed as ``(1 - g) * y + correction``, so an untrained
    network already returns the guidance-masked mixture.
    """

    in_planes = 5

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        ch = [cfg.base_width * m for m in cfg.ch_mult]
        self.emb_mlp = nn.Sequential(
            nn.Linear(cfg.emb_dim, cfg.emb_dim), nn.SiLU(), nn.Linear(cfg.emb_dim, cfg.emb_dim)
        )
        self.inp = nn.Conv2d(self.in_planes, ch[0], 3, padding=1)

        self.down = nn.ModuleList()
        self.downsample = nn.ModuleList()
        skips = [ch[0]]
        cur = ch[0]
        for i, c in enumerate(ch):
            blocks = nn.ModuleList()
            for _ in range(cfg.num_res_blocks):
                blocks.append(ResBlock(cur, c, cfg.emb_dim))
                cur = c
                skips.append(cur)
            self.down.append(blocks)
            if i < len(ch) - 1:
                self.downsample.append(nn.Conv2d(cur, cur, 3, stride=2, padding=1))
                skips.append(cur)
        self.mid = nn.ModuleList([ResBlock(cur, cur, cfg.emb_dim), ResBlock(cur, cur, cfg.emb_dim)])

        self.up = nn.ModuleList()
        self.upsample = nn.ModuleList()
        for i, c in reversed(list(enumerate(ch))):
            blocks = nn.ModuleList()
            for _ in range(cfg.num_res_blocks + 1):
                blocks.append(ResBlock(cur + skips.pop(), c, cfg.emb_dim))
                cur = c
            self.up.append(blocks)
            if i > 0:
                self.upsample.append(nn.Conv2d(cur, cur, 3, padding=1))
        self.out_norm = nn.GroupNorm(_groups(cur), cur)
        self.out = nn.Conv2d(cur, 2, 3, padding=1)
        self.levels = len(ch)

    def embed(self, t):
        emb = timestep_embedding(t, self.cfg.T, self.cfg.emb_dim)
        return self.emb_mlp(emb.to(self.emb_mlp[0].weight.dtype))

    def forward(self, x_t, y, g, t):
        """x_t, y: complex (B, K, F); g: real (B, K, F); t: int or (B,) ints."""
        planes = torch.stack([x_t.real, x_t.imag, y.real, y.imag, g], dim=1)
        planes, (k, f) = _pad_to_multiple(planes, 2 ** (self.levels - 1))
        t = torch.as_tensor(t).reshape(-1)
        if t.numel() == 1:
            t = t.expand(planes.shape[0])
        emb = self.embed(t)

        h = self.inp(planes)
        hs = [h]
        for i, blocks in enumerate(self.down):
            for block in blocks:
                h = block(h, emb)
                hs.append(h)
            if i < self.levels - 1:
                h = self.downsample[i](h)
                hs.append(h)
        for block in self.mid:
            h = block(h, emb)
        for j, blocks in enumerate(self.up):
            for block in blocks:
                h = block(torch.cat([h, hs.pop()], dim=1), emb)
            if j < self.levels - 1:
                h = F.interpolate(h, scale_factor=2.0, mode="nearest")
                h = self.upsample[j](h)
        h = self.out(F.silu(self.out_norm(h)))[..., :k, :f]
        return (1.0 - g) * y + torch.complex(h[:, 0], h[:, 1])


class MaskNet(nn.Module):
    """Encoder / mask-decoder UNet producing a bounded mask from y."""

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        w, n = cfg.cmen_width, cfg.cmen_levels
        ch = [w * 2 ** i for i in range(n)]
        self.inp = nn.Conv2d(2, ch[0], 3, padding=1)
        self.enc = nn.ModuleList()
        for i in range(n):
            cin = ch[max(i - 1, 0)]
            stride = 1 if i == 0 else 2
            self.enc.append(self._block(cin, ch[i], stride))
        self.dec = nn.ModuleList()
        for i in range(n - 2, -1, -1):
            self.dec.append(self._block(ch[i + 1] + ch[i], ch[i], 1))
        self.head = nn.Conv2d(ch[0], 1, 1)
        self.levels = n

    @staticmethod
    def _block(cin, cout, stride):
        return nn.Sequential(
            nn.Conv2d(cin, cout, 3, stride=stride, padding=1),
            nn.GroupNorm(_groups(cout), cout),
            nn.SiLU(),
            nn.Conv2d(cout, cout, 3, padding=1),
            nn.GroupNorm(_groups(cout), cout),
            nn.SiLU(),
        )

    def forward(self, y):
        """y: complex (B, K, F) -> mask (B, K, F) in (0, 1)."""
        planes = torch.stack([y.real, y.imag], dim=1)
        planes, (k, f) = _pad_to_multiple(planes, 2 ** (self.levels - 1))
        h = self.inp(planes)
        feats = []
        for block in self.enc:
            h = block(h)
            feats.append(h)
        h = feats.pop()
        for block in self.dec:
            skip = feats.pop()
            h = F.interpolate(h, size=skip.shape[-2:], mode="nearest")
            h = block(torch.cat([h, skip], dim=1))
        return torch.sigmoid(self.head(h)[:, 0, :k, :f])


def count_params(module):
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


def build_nets(cfg, seed=0):
    """Construct (mask net, denoiser) with reproducible initialisation."""
    gen_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        cmen, den = MaskNet(cfg), Denoiser(cfg)
    finally:
        torch.random.set_rng_state(gen_state)
    return cmen, den


def _to_tensor(a, dtype):
    a = a.values if hasattr(a, "values") else a
    t = torch.as_tensor(np.asarray(a))
    if t.is_complex():
        ctype = torch.complex128 if dtype == torch.float64 else torch.complex64
        t = t.to(ctype)
    else:
        t = t.to(dtype)
    return t


def _param_dtype(module):
    for p in module.parameters():
        return p.dtype
    return torch.get_default_dtype()


@torch.no_grad()
def cmen_forward(cmen, y):
    """Numpy-facing mask estimate for a single (K, F) compressed spectrogram."""
    y_arr = y.values if hasattr(y, "values") else np.asarray(y)
    if not np.all(np.isfinite(y_arr)):
        raise NumericalError("non-finite input to mask net")
    y_t = _to_tensor(y_arr, _param_dtype(cmen))[None]
    m = cmen(y_t)[0].to(torch.float64).numpy()
    return Mask(m)


@torch.no_grad()
def denoiser_forward(den, x_t, y, g, t):
    """Numpy-facing x0 estimate for one (K, F) state; returns complex128."""
    x_arr, y_arr, g_arr = (a.values if hasattr(a, "values") else np.asarray(a) for a in (x_t, y, g))
    if not x_arr.shape == y_arr.shape == g_arr.shape:
        raise ContractError(f"shape mismatch {x_arr.shape}, {y_arr.shape}, {g_arr.shape}")
    if not 1 <= int(t) <= den.cfg.T:
        raise IndexError(f"timestep {t} outside 1..{den.cfg.T}")
    dt = _param_dtype(den)
    out = den(_to_tensor(x_arr, dt)[None], _to_tensor(y_arr, dt)[None], _to_tensor(g_arr, dt)[None], int(t))
    return out[0].to(torch.complex128).numpy()


class DenoiserCallable:
    """Adapter exposing a ``Denoiser`` as ``f(x_t, y, g, t)`` and counting calls."""

    def __init__(self, den):
        self.den = den
        self.calls = 0

    def __call__(self, x_t, y, g, t):
        self.calls += 1
        return denoiser_forward(self.den, x_t, y, g, t)


