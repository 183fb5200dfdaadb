"""Multi-head attention and positional encodings shared by FDAF and the decoder."""

import math

import torch
import torch.nn as nn


class MultiheadAttention(nn.Module):
    def __init__(self, dim, heads):
        super().__init__()
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def attention_weights(self, q, k):
        B, Nq, D = q.shape
        h = self.heads
        qh = self.q_proj(q).view(B, Nq, h, D // h).transpose(1, 2)
        kh = self.k_proj(k).view(B, k.shape[1], h, D // h).transpose(1, 2)
        logits = qh @ kh.transpose(-2, -1) / math.sqrt(D // h)
        return logits.softmax(dim=-1)  # [B, h, Nq, Nk]

    def forward(self, q, k, v):
        if k.shape[1] == 0:
            raise ValueError("attention requires at least one key token")
        B, Nq, D = q.shape
        h = self.heads
        attn = self.attention_weights(q, k)
        vh = self.v_proj(v).view(B, v.shape[1], h, D // h).transpose(1, 2)
        out = (attn @ vh).transpose(1, 2).reshape(B, Nq, D)
        return self.out_proj(out)


def sinusoidal_point_encoding(coords, dim):
    """Encode normalized (x, y) pairs into `dim` channels with sin/cos banks."""
    if dim % 4 != 0:
        raise ValueError(f"encoding dim must be divisible by 4, got {dim}")
    n = dim // 4
    freqs = (2.0 ** torch.arange(n, dtype=coords.dtype, device=coords.device)) * math.pi
    x = coords[..., 0:1] * freqs
    y = coords[..., 1:2] * freqs
    return torch.cat([x.sin(), x.cos(), y.sin(), y.cos()], dim=-1)


def grid_position_encoding(h, w, dim, dtype=torch.float32, device=None):
    """Sinusoidal encoding for every cell of an h x w grid; returns [h*w, dim]."""
    ys = (torch.arange(h, dtype=dtype, device=device) + 0.5) / h
    xs = (torch.arange(w, dtype=dtype, device=device) + 0.5) / w
    yy, xx = torch.meshgrid(ys, xs, indexing="ij")
    coords = torch.stack([xx.reshape(-1), yy.reshape(-1)], dim=-1)
    return sinusoidal_point_encoding(coords, dim)
