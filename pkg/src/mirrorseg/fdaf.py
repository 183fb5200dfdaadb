"""Frequency-domain detail injection into memory tokens via cross-attention."""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .attention import MultiheadAttention


@dataclass
class SpectralFeature:
    """One-sided channel spectrum per token."""
    magnitude: torch.Tensor  # [B, N1, C//2 + 1], >= 0
    phase: torch.Tensor      # [B, N1, C//2 + 1], in (-pi, pi]


def channel_fft(f_low):
    """Real FFT along the channel axis of flattened tokens [B, N1, C]."""
    if f_low.shape[-1] < 2:
        raise ValueError(f"need at least 2 channels, got {f_low.shape[-1]}")
    spec = torch.fft.rfft(f_low, dim=-1)
    return SpectralFeature(magnitude=spec.abs(), phase=spec.angle())


def dft_oracle(vec):
    """Naive O(C^2) one-sided DFT of a 1D real vector; returns (magnitude, phase)."""
    import math
    c = len(vec)
    bins = c // 2 + 1
    mag, ph = [], []
    for k in range(bins):
        re = sum(float(vec[i]) * math.cos(-2 * math.pi * k * i / c) for i in range(c))
        im = sum(float(vec[i]) * math.sin(-2 * math.pi * k * i / c) for i in range(c))
        mag.append(math.hypot(re, im))
        ph.append(math.atan2(im, re))
    return mag, ph


class FrequencyCrossAttention(nn.Module):
    """Memory tokens query the projected magnitude/phase spectra (keys = values)."""

    def __init__(self, channels, dim, heads):
        super().__init__()
        bins = channels // 2 + 1
        self.spec_proj = nn.Linear(2 * bins, dim)
        self.attn = MultiheadAttention(dim, heads)
        # feedforward applied to the attended output before the residual add
        self.ffn = nn.Sequential(nn.LayerNorm(dim), nn.GELU(), nn.Linear(dim, dim))

    def forward(self, mem, spec):
        if spec.magnitude.shape[1] == 0:
            raise ValueError("no spectral key tokens")
        kv = self.spec_proj(torch.cat([spec.magnitude, spec.phase], dim=-1))
        return mem + self.ffn(self.attn(mem, kv, kv))


class FDAF(nn.Module):
    """Flattens the low-level fused feature, runs the channel FFT, and enriches
    memory tokens (projected high-level fused feature) with spectral detail.
    Also owns the intermediate prediction head."""

    def __init__(self, cfg):
        super().__init__()
        self.mem_proj = nn.Linear(cfg.c_high, cfg.decoder_dim)
        self.cross = FrequencyCrossAttention(cfg.c_low, cfg.decoder_dim,
                                             cfg.fdaf_heads)
        self.inter_head = nn.Conv2d(cfg.c_low, 1, 1)
        self._detach_residual = False  # test hook: breaks gradient flow when set

    def memory_tokens(self, fused_high):
        B, C, H, W = fused_high.shape
        return self.mem_proj(fused_high.flatten(2).transpose(1, 2))

    def intermediate_prediction(self, fused_low):
        logits = self.inter_head(fused_low)
        return logits, torch.sigmoid(logits)

    def forward(self, fused_low, fused_high):
        B, C, H, W = fused_low.shape
        tokens = fused_low.flatten(2).transpose(1, 2)  # [B, H*W, C]
        spec = channel_fft(tokens)
        mem = self.memory_tokens(fused_high)
        if self._detach_residual:
            enhanced = mem.detach() + self.cross.ffn(
                self.cross.attn(mem, *(self.cross.spec_proj(
                    torch.cat([spec.magnitude, spec.phase], dim=-1)),) * 2))
        else:
            enhanced = self.cross(mem, spec)
        inter_logits, freq_map = self.intermediate_prediction(fused_low)
        return {
            "enhanced": enhanced,          # [B, N2, D]
            "inter_logits": inter_logits,  # [B, 1, H', W']
            "freq_map": freq_map,          # sigmoid of inter_logits
            "spectral": spec,
        }
