"""Space-Time U-Net noise predictor.

Tensors are laid out [B, C, T, H, W]. Seven attention slots can be
switched on independently::

    1  entry level (encoder, full resolution)
    2  encoder level 2
    3  encoder levels >= 3
    4  bottleneck
    5  decoder levels >= 3
    6  decoder level 2
    7  exit level (decoder, full resolution)

Each enabled slot adds spatial attention over the H x W tokens of every
frame followed by temporal attention over the T tokens of every pixel,
the latter with rotary position encoding. The bottleneck also carries a
global space-time attention block regardless of the slot selection.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ConfigurationError, RejectedInputError

POSITIONS = (1, 2, 3, 4, 5, 6, 7)


@dataclass(frozen=True)
class STUNetConfig:
    attention_positions: tuple = POSITIONS
    depth: int = 3
    base_channels: int = 64
    channel_mults: tuple = (1, 2, 4)
    heads: int = 4
    in_channels: int = 6
    groups: int = 8
    positional_encoding: str = "rotary"

    def __post_init__(self):
        pos = tuple(sorted(set(int(p) for p in self.attention_positions)))
        if any(p not in POSITIONS for p in pos):
            raise ConfigurationError(f"attention positions must be a subset of {POSITIONS}, got {pos}")
        object.__setattr__(self, "attention_positions", pos)
        object.__setattr__(self, "channel_mults", tuple(int(m) for m in self.channel_mults))
        if self.depth < 1 or len(self.channel_mults) != self.depth:
            raise ConfigurationError("channel_mults must list one multiplier per encoder level")
        if self.positional_encoding != "rotary":
            raise ConfigurationError("only rotary temporal encoding is supported")
        for p in pos:
            if p in (3, 5) and self.depth < 3 or p in (2, 6) and self.depth < 2:
                raise ConfigurationError(f"position {p} needs a deeper network (depth={self.depth})")
        for c in self.channels:
            if c % self.groups or c % self.heads or (c // self.heads) % 2:
                raise ConfigurationError(
                    f"channel count {c} must be divisible by groups ({self.groups}) and give an even "
                    f"head dimension with {self.heads} heads")

    @property
    def channels(self) -> tuple:
        return tuple(self.base_channels * m for m in self.channel_mults)

    def encoder_slot(self, level: int) -> int:
        return 1 if level == 0 else (2 if level == 1 else 3)

    def decoder_slot(self, level: int) -> int:
        return 7 if level == 0 else (6 if level == 1 else 5)

    def to_dict(self) -> dict:
        return asdict(self)


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of (float) step indices, [B] -> [B, dim]."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float()[:, None] * freqs[None]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


def rotary(x: torch.Tensor) -> torch.Tensor:
    """Rotate feature pairs of x [..., L, d] by position-dependent angles."""
    L, d = x.shape[-2], x.shape[-1]
    inv = 10000.0 ** (-torch.arange(0, d, 2, dtype=torch.float32, device=x.device) / d)
    ang = torch.arange(L, dtype=torch.float32, device=x.device)[:, None] * inv[None]
    cos, sin = ang.cos().to(x.dtype), ang.sin().to(x.dtype)
    x1, x2 = x[..., 0::2], x[..., 1::2]
    out = torch.stack([x1 * cos - x2 * sin, x1 * sin + x2 * cos], dim=-1)
    return out.flatten(-2)


def _conv(cin, cout, kernel=3, stride=1):
    pad = kernel // 2
    return nn.Conv3d(cin, cout, kernel, stride=stride, padding=pad, padding_mode="replicate" if pad else "zeros")


class ResBlock(nn.Module):
    def __init__(self, cin, cout, temb_dim, groups):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, cin)
        self.conv1 = _conv(cin, cout)
        self.temb = nn.Linear(temb_dim, cout)
        self.norm2 = nn.GroupNorm(groups, cout)
        self.conv2 = _conv(cout, cout)
        self.skip = nn.Conv3d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb(emb)[:, :, None, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class _TokenAttention(nn.Module):
    """Pre-norm multi-head self-attention over a token axis, residual output."""

    def __init__(self, channels, heads, groups, rope=False):
        super().__init__()
        self.heads = heads
        self.rope = rope
        self.norm = nn.GroupNorm(groups, channels)
        self.qkv = nn.Linear(channels, 3 * channels)
        self.proj = nn.Linear(channels, channels)

    def attend(self, tokens):
        # tokens [N, L, C]
        N, L, C = tokens.shape
        q, k, v = self.qkv(tokens).reshape(N, L, 3, self.heads, C // self.heads).permute(2, 0, 3, 1, 4)
        if self.rope:
            q, k = rotary(q), rotary(k)
        out = F.scaled_dot_product_attention(q, k, v)
        return self.proj(out.transpose(1, 2).reshape(N, L, C))


class SpatialAttention(_TokenAttention):
    def forward(self, x):
        B, C, T, H, W = x.shape
        tok = self.norm(x).permute(0, 2, 3, 4, 1).reshape(B * T, H * W, C)
        out = self.attend(tok).reshape(B, T, H, W, C).permute(0, 4, 1, 2, 3)
        return x + out


class TemporalAttention(_TokenAttention):
    def __init__(self, channels, heads, groups):
        super().__init__(channels, heads, groups, rope=True)

    def forward(self, x):
        B, C, T, H, W = x.shape
        tok = self.norm(x).permute(0, 3, 4, 2, 1).reshape(B * H * W, T, C)
        out = self.attend(tok).reshape(B, H, W, T, C).permute(0, 4, 3, 1, 2)
        return x + out


class GlobalAttention(_TokenAttention):
    def forward(self, x):
        B, C, T, H, W = x.shape
        tok = self.norm(x).permute(0, 2, 3, 4, 1).reshape(B, T * H * W, C)
        out = self.attend(tok).reshape(B, T, H, W, C).permute(0, 4, 1, 2, 3)
        return x + out


class SpaceTimeAttention(nn.Module):
    def __init__(self, channels, heads, groups):
        super().__init__()
        self.spatial = SpatialAttention(channels, heads, groups)
        self.temporal = TemporalAttention(channels, heads, groups)

    def forward(self, x):
        return self.temporal(self.spatial(x))


class STUNet(nn.Module):
    """Predicts the injected noise from (noisy stress ++ condition, t_d)."""

    def __init__(self, config: STUNetConfig | None = None):
        super().__init__()
        cfg = config or STUNetConfig()
        self.config = cfg
        ch = cfg.channels
        c0 = cfg.base_channels
        temb = 4 * c0
        g = cfg.groups
        self.temb_mlp = nn.Sequential(nn.Linear(c0, temb), nn.SiLU(), nn.Linear(temb, temb))
        self.stem = _conv(cfg.in_channels, ch[0])

        def attn(slot, c):
            return SpaceTimeAttention(c, cfg.heads, g) if slot in cfg.attention_positions else nn.Identity()

        self.enc_blocks = nn.ModuleList()
        self.enc_attn = nn.ModuleList()
        self.down = nn.ModuleList()
        prev = ch[0]
        for i, c in enumerate(ch):
            self.enc_blocks.append(ResBlock(prev, c, temb, g))
            self.enc_attn.append(attn(cfg.encoder_slot(i), c))
            self.down.append(_conv(c, c, stride=(1, 2, 2)))
            prev = c

        self.mid_block = ResBlock(prev, prev, temb, g)
        self.mid_global = GlobalAttention(prev, cfg.heads, g)
        self.mid_attn = attn(4, prev)

        self.up = nn.ModuleList()
        self.dec_blocks = nn.ModuleList()
        self.dec_attn = nn.ModuleList()
        for i in reversed(range(cfg.depth)):
            c = ch[i]
            self.up.append(_conv(prev, c))
            self.dec_blocks.append(ResBlock(2 * c, c, temb, g))
            self.dec_attn.append(attn(cfg.decoder_slot(i), c))
            prev = c
        self.out_norm = nn.GroupNorm(g, prev)
        self.out_conv = _conv(prev, 1)

    def check_input(self, x: torch.Tensor) -> None:
        if x.ndim != 5 or x.shape[1] != self.config.in_channels:
            raise RejectedInputError(
                f"expected [B, {self.config.in_channels}, T, H, W], got {tuple(x.shape)}")
        k = 2 ** self.config.depth
        if x.shape[-1] % k or x.shape[-2] % k:
            raise ConfigurationError(f"H and W must be divisible by 2**depth = {k}, got {tuple(x.shape[-2:])}")

    def forward(self, x: torch.Tensor, t_d: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        t_d = torch.as_tensor(t_d, device=x.device).reshape(-1).expand(x.shape[0])
        emb = self.temb_mlp(timestep_embedding(t_d, self.config.base_channels).to(x.dtype))
        h = self.stem(x)
        skips = []
        for block, att, down in zip(self.enc_blocks, self.enc_attn, self.down):
            h = att(block(h, emb))
            skips.append(h)
            h = down(h)
        h = self.mid_attn(self.mid_global(self.mid_block(h, emb)))
        for up, block, att in zip(self.up, self.dec_blocks, self.dec_attn):
            skip = skips.pop()
            h = up(F.interpolate(h, size=skip.shape[2:], mode="nearest"))
            h = att(block(torch.cat([h, skip], dim=1), emb))
        return self.out_conv(F.silu(self.out_norm(h)))


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
