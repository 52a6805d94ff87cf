"""Attention encoder-decoder CNN for flood-map regression.

The model maps a protection-context grid plus a scalar sea-level-rise
depth to a nonnegative peak-water-level grid of the same size:

* encoder: depthwise-separable downsampling blocks with pooled-feature
  concatenation and projected residuals (spatial dims halve per level);
* bottleneck: grouped-convolution (ResNeXt-style) residuals wrapped
  around sequential channel and spatial attention gates (CBAM-style);
* decoder: transpose-conv upsampling with encoder skip fusion, where a
  sea-level gate modulates decoder channels from pooled encoder context
  and the SLR scalar;
* head: 1-channel conv output plus an SLR-weighted channel sum, passed
  through a nonnegative activation.

The SLR scalar is divided by a fixed 2 m scale before any dense layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

SLR_SCALE_M = 2.0

SLR_MODES = ("bottleneck", "fr", "end", "see_end", "none")


@dataclass(frozen=True)
class ModelConfig:
    depth_k: int = 4
    base_channels: int = 16
    cardinality_g: int = 8
    bottleneck_width: int = 4
    marx_blocks: int = 4
    see_blocks: int = 1
    slr_mode: str = "see_end"
    reduction_ratio: int = 8
    input_n: int = 64

    def __post_init__(self):
        if self.depth_k < 1:
            raise ValueError("depth_k must be >= 1")
        if self.input_n % (2**self.depth_k) != 0:
            raise ValueError(
                f"input_n={self.input_n} must be divisible by 2^depth_k={2**self.depth_k}"
            )
        if self.marx_blocks < 0:
            raise ValueError("marx_blocks must be >= 0")
        if not 0 <= self.see_blocks <= self.depth_k:
            raise ValueError(f"see_blocks must be in 0..{self.depth_k}")
        if self.slr_mode not in SLR_MODES:
            raise ValueError(f"slr_mode must be one of {SLR_MODES}")
        if self.reduction_ratio < 1:
            raise ValueError("reduction_ratio must be >= 1")
        f = self.encoder_channels()[-1]
        if f % self.cardinality_g != 0:
            raise ValueError(
                f"bottleneck channels {f} not divisible by cardinality {self.cardinality_g}"
            )

    @property
    def group_channels(self) -> int:
        """Internal width of the grouped-convolution stage."""
        return self.cardinality_g * self.bottleneck_width

    def encoder_channels(self) -> list[int]:
        """Channels after each encoder level: base doubled per level."""
        return [self.base_channels * 2**k for k in range(self.depth_k)]

    def to_dict(self) -> dict:
        return {
            "depth_k": self.depth_k,
            "base_channels": self.base_channels,
            "cardinality_g": self.cardinality_g,
            "bottleneck_width": self.bottleneck_width,
            "marx_blocks": self.marx_blocks,
            "see_blocks": self.see_blocks,
            "slr_mode": self.slr_mode,
            "reduction_ratio": self.reduction_ratio,
            "input_n": self.input_n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class EncoderBlock(nn.Module):
    """Halve spatial dims: depthwise 2x2 stride-2 conv -> pointwise channel
    expansion, concatenated with the 2x2-pooled input, plus a projected
    residual of the input."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        if c_out <= c_in:
            raise ValueError(f"encoder block must expand channels ({c_in} -> {c_out})")
        self.depthwise = nn.Conv2d(c_in, c_in, kernel_size=2, stride=2, groups=c_in)
        self.pointwise = nn.Conv2d(c_in, c_out - c_in, kernel_size=1)
        self.pool = nn.AvgPool2d(2)
        self.project = nn.Conv2d(c_in, c_out, kernel_size=1, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] % 2 or x.shape[-2] % 2:
            raise ValueError(f"spatial dims must be even, got {tuple(x.shape[-2:])}")
        y = F.relu(self.pointwise(self.depthwise(x)))
        y = torch.cat([y, self.pool(x)], dim=1)
        return F.relu(y + self.project(x))


class ResNeXtResidual(nn.Module):
    """Grouped-convolution residual: 1x1 reduce, grouped 3x3, 1x1 expand."""

    def __init__(self, channels: int, group_channels: int, cardinality: int):
        super().__init__()
        if group_channels % cardinality != 0:
            raise ValueError(f"group width {group_channels} not divisible by {cardinality}")
        self.reduce = nn.Conv2d(channels, group_channels, kernel_size=1)
        self.grouped = nn.Conv2d(
            group_channels, group_channels, kernel_size=3, padding=1, groups=cardinality
        )
        self.expand = nn.Conv2d(group_channels, channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = F.relu(self.reduce(x))
        y = F.relu(self.grouped(y))
        y = self.expand(y)
        return F.relu(x + y)


class ChannelAttention(nn.Module):
    """Sigmoid channel gate from the globally average-pooled descriptor."""

    def __init__(self, channels: int, reduction_ratio: int):
        super().__init__()
        hidden = max(1, channels // reduction_ratio)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        z = x.mean(dim=(2, 3))
        return torch.sigmoid(self.fc2(F.relu(self.fc1(z))))[:, :, None, None]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gate(x)


class SpatialAttention(nn.Module):
    """Sigmoid spatial gate from the channel-mean map through a 7x7 conv."""

    def __init__(self, kernel_size: int = 7):
        super().__init__()
        self.conv = nn.Conv2d(1, 1, kernel_size=kernel_size, padding=kernel_size // 2)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        q = x.mean(dim=1, keepdim=True)
        return torch.sigmoid(self.conv(q))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gate(x)


class BottleneckBlock(nn.Module):
    """Grouped-conv residual, channel + spatial attention, second residual;
    shape preserving."""

    def __init__(self, channels: int, group_channels: int, cardinality: int, reduction_ratio: int):
        super().__init__()
        self.res1 = ResNeXtResidual(channels, group_channels, cardinality)
        self.channel_attn = ChannelAttention(channels, reduction_ratio)
        self.spatial_attn = SpatialAttention()
        self.res2 = ResNeXtResidual(channels, group_channels, cardinality)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.res1(x)
        y = self.channel_attn(y)
        y = self.spatial_attn(y)
        return self.res2(y)


class SeaLevelGate(nn.Module):
    """Per-channel decoder gate from pooled encoder context and the SLR scalar.

    Encoder features are average-pooled to a fixed small footprint,
    flattened, and densely mapped to a context vector; the scaled SLR
    scalar gets its own dense embedding; their concatenation feeds a
    sigmoid dense layer producing one coefficient per decoder channel.
    """

    POOL = 4

    def __init__(self, enc_channels: int, dec_channels: int, context_dim: int = 16, slr_dim: int = 8):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d(self.POOL)
        self.context_fc = nn.Linear(enc_channels * self.POOL * self.POOL, context_dim)
        self.slr_fc = nn.Linear(1, slr_dim)
        self.combine_fc = nn.Linear(context_dim + slr_dim, dec_channels)

    def gate(self, enc: torch.Tensor, slr: torch.Tensor) -> torch.Tensor:
        context = F.relu(self.context_fc(self.pool(enc).flatten(1)))
        slr_feat = self.slr_fc(slr[:, None] / SLR_SCALE_M)
        return torch.sigmoid(self.combine_fc(torch.cat([context, slr_feat], dim=1)))

    def forward(self, enc: torch.Tensor, dec: torch.Tensor, slr: torch.Tensor) -> torch.Tensor:
        if enc.shape[0] != dec.shape[0]:
            raise ValueError("encoder/decoder batch sizes differ")
        return dec * self.gate(enc, slr)[:, :, None, None]


class DecoderBlock(nn.Module):
    """Double spatial dims: 2x2 stride-2 transpose conv, skip concatenation,
    3x3 fuse conv."""

    def __init__(self, c_in: int, c_skip: int, c_out: int):
        super().__init__()
        self.upsample = nn.ConvTranspose2d(c_in, c_out, kernel_size=2, stride=2)
        self.fuse = nn.Conv2d(c_out + c_skip, c_out, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        y = F.relu(self.upsample(x))
        if y.shape[-2:] != skip.shape[-2:]:
            raise ValueError(f"skip shape {tuple(skip.shape[-2:])} != upsampled {tuple(y.shape[-2:])}")
        return F.relu(self.fuse(torch.cat([y, skip], dim=1)))


class FloodNet(nn.Module):
    """Full surrogate: grid + SLR scalar -> nonnegative grid of equal size."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        chans = cfg.encoder_channels()
        self.encoder_blocks = nn.ModuleList(
            EncoderBlock(c_in, c_out) for c_in, c_out in zip([1] + chans[:-1], chans)
        )
        bottleneck_ch = chans[-1]
        self.bottleneck_blocks = nn.ModuleList(
            BottleneckBlock(bottleneck_ch, cfg.group_channels, cfg.cardinality_g, cfg.reduction_ratio)
            for _ in range(cfg.marx_blocks)
        )

        # decoder level k consumes dec_in[k], concatenates skip_ch[k], and
        # emits dec_out[k]; the full-resolution level skips the raw input
        dec_in = [bottleneck_ch] + [max(c // 2, chans[0]) for c in chans[::-1][:-1]]
        dec_out = dec_in[1:] + [chans[0]]
        skip_ch = chans[::-1][1:] + [1]
        self.decoder_blocks = nn.ModuleList(
            DecoderBlock(ci, cs, co) for ci, cs, co in zip(dec_in, skip_ch, dec_out)
        )

        self.see_active = cfg.slr_mode == "see_end" and cfg.see_blocks > 0
        # gates attach to the deepest-resolution end of the decoder: the
        # last see_blocks levels, pairing each with its skip source
        self.see_gates = nn.ModuleDict()
        if self.see_active:
            for level in range(cfg.depth_k - cfg.see_blocks, cfg.depth_k):
                self.see_gates[str(level)] = SeaLevelGate(skip_ch[level], dec_out[level])

        if cfg.slr_mode == "bottleneck":
            self.slr_mid_fc = nn.Linear(1, bottleneck_ch)
        elif cfg.slr_mode == "fr":
            self.slr_mid_fc = nn.Linear(1, dec_out[-1])
        else:
            self.slr_mid_fc = None

        self.out_conv = nn.Conv2d(dec_out[-1], 1, kernel_size=3, padding=1)
        self.slr_end_fc = (
            nn.Linear(1, dec_out[-1]) if cfg.slr_mode in ("end", "see_end") else None
        )

    def _check_input(self, x: torch.Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (B, 1, n, n) input, got {tuple(x.shape)}")
        n = x.shape[-1]
        if x.shape[-2] != n or n % (2**self.cfg.depth_k) != 0:
            raise ValueError(
                f"grid size {tuple(x.shape[-2:])} must be square and divisible by 2^{self.cfg.depth_k}"
            )

    def forward(self, x: torch.Tensor, slr: torch.Tensor) -> torch.Tensor:
        self._check_input(x)
        slr = torch.as_tensor(slr, dtype=x.dtype, device=x.device).reshape(-1)
        if slr.shape[0] != x.shape[0]:
            raise ValueError(f"slr batch {slr.shape[0]} != input batch {x.shape[0]}")

        skips = [x]
        feat = x
        for block in self.encoder_blocks:
            feat = block(feat)
            skips.append(feat)

        for block in self.bottleneck_blocks:
            feat = block(feat)

        if self.cfg.slr_mode == "bottleneck":
            feat = feat * torch.sigmoid(self.slr_mid_fc(slr[:, None] / SLR_SCALE_M))[:, :, None, None]

        # skips holds [input, enc_1 .. enc_K]; decoder level k fuses the
        # map at its output resolution: enc_{K-1-k}, ending at the input
        for level, block in enumerate(self.decoder_blocks):
            skip = skips[self.cfg.depth_k - 1 - level]
            feat = block(feat, skip)
            if self.see_active and str(level) in self.see_gates:
                feat = self.see_gates[str(level)](skip, feat, slr)

        if self.cfg.slr_mode == "fr":
            feat = feat * torch.sigmoid(self.slr_mid_fc(slr[:, None] / SLR_SCALE_M))[:, :, None, None]

        out = self.out_conv(feat)
        if self.slr_end_fc is not None:
            w_slr = self.slr_end_fc(slr[:, None] / SLR_SCALE_M)
            out = out + (feat * w_slr[:, :, None, None]).sum(dim=1, keepdim=True)
        return F.relu(out)


def count_params(module: nn.Module) -> int:
    """Exact number of learnable scalar parameters."""
    return sum(p.numel() for p in module.parameters())


def build_model(cfg: ModelConfig, seed: int | None = None) -> FloodNet:
    """Construct a model, optionally with seeded initialization."""
    if seed is not None:
        torch.manual_seed(seed)
    return FloodNet(cfg)


def predict_grid(model: FloodNet, input_grid, slr_m: float) -> torch.Tensor:
    """Single-sample convenience forward: (n, n) array-like -> (n, n) tensor."""
    x = torch.as_tensor(input_grid, dtype=torch.float32)[None, None]
    with torch.no_grad():
        out = model(x, torch.tensor([float(slr_m)]))
    return out[0, 0]
