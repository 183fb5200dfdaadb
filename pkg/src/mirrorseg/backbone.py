"""Lightweight two-stream hierarchical encoder (RGB + depth, separate weights)."""

import torch
import torch.nn as nn

from .config import RunConfig


class _Stage(nn.Module):
    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.down = nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1)
        self.norm1 = nn.GroupNorm(4, out_ch)
        self.conv = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(4, out_ch)
        self.act = nn.GELU()

    def forward(self, x):
        x = self.act(self.norm1(self.down(x)))
        return self.act(self.norm2(self.conv(x)))


class FeaturePyramid:
    """Low (stride 4) and high (stride 16) feature maps from one stream."""

    def __init__(self, low, high):
        self.low = low
        self.high = high


class Encoder(nn.Module):
    """4 stages of strided conv + GroupNorm + GELU; taps after stages 2 and 4."""

    def __init__(self, in_ch, c_low, c_high):
        super().__init__()
        c1 = max(8, c_low // 2)
        c3 = max(c_low, c_high // 2)
        self.stage1 = _Stage(in_ch, c1)
        self.stage2 = _Stage(c1, c_low)
        self.stage3 = _Stage(c_low, c3)
        self.stage4 = _Stage(c3, c_high)

    def forward(self, x):
        if x.shape[-2] % 16 != 0 or x.shape[-1] % 16 != 0:
            raise ValueError(f"input spatial size {tuple(x.shape[-2:])} "
                             "must be divisible by 16")
        x = self.stage1(x)
        low = self.stage2(x)
        high = self.stage4(self.stage3(low))
        return FeaturePyramid(low, high)


class TwoStreamBackbone(nn.Module):
    """RGB and depth encoders with identical topology, separate weights."""

    def __init__(self, cfg: RunConfig):
        super().__init__()
        self.rgb = Encoder(3, cfg.c_low, cfg.c_high)
        self.depth = Encoder(1, cfg.c_low, cfg.c_high)

    def extract_features(self, images, stream):
        if stream == "rgb":
            return self.rgb(images)
        if stream == "depth":
            return self.depth(images)
        raise ValueError(f"unknown stream {stream!r}")
