"""Mask decoding with a dedicated learnable mirror token.

Token layout: [t_obj, t_iou, mask tokens, t_mirror, sparse prompt tokens];
the mirror token's output embedding is turned into per-channel weights whose
dot product with the fused contrast feature yields the mask logits.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import MultiheadAttention, grid_position_encoding, \
    sinusoidal_point_encoding


@dataclass
class TokenSequence:
    tokens: torch.Tensor   # [B, 2 + n_mask + 1 + n_sparse, D]
    mirror_index: int


class PromptEncoder(nn.Module):
    """Sinusoidal encoding of normalized point coords plus a learned fg embedding."""

    def __init__(self, dim):
        super().__init__()
        self.foreground = nn.Parameter(torch.zeros(dim))
        nn.init.normal_(self.foreground, std=0.02)
        self.dim = dim

    def forward(self, coords):
        # coords: [K, 2] or [B, K, 2]
        if coords.dim() == 2:
            coords = coords[None]
        return sinusoidal_point_encoding(coords, self.dim) + self.foreground


class TwoWayLayer(nn.Module):
    def __init__(self, dim, heads):
        super().__init__()
        self.self_attn = MultiheadAttention(dim, heads)
        self.norm1 = nn.LayerNorm(dim)
        self.cross_t2i = MultiheadAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, 2 * dim), nn.GELU(),
                                 nn.Linear(2 * dim, dim))
        self.norm3 = nn.LayerNorm(dim)
        self.cross_i2t = MultiheadAttention(dim, heads)
        self.norm4 = nn.LayerNorm(dim)

    def forward(self, tokens, image):
        tokens = self.norm1(tokens + self.self_attn(tokens, tokens, tokens))
        tokens = self.norm2(tokens + self.cross_t2i(tokens, image, image))
        tokens = self.norm3(tokens + self.mlp(tokens))
        image = self.norm4(image + self.cross_i2t(image, tokens, tokens))
        return tokens, image


class ContextContrast(nn.Module):
    """Patch-unfold difference of two aligned maps, recombined by attention.

    For each position the k^2 difference vectors are softmax-weighted by a
    learned query; identical inputs therefore yield an exactly zero output.
    """

    def __init__(self, channels, window=3):
        super().__init__()
        if window % 2 == 0:
            raise ValueError(f"window must be odd, got {window}")
        self.window = window
        self.query = nn.Parameter(torch.zeros(channels))
        nn.init.normal_(self.query, std=0.02)

    def patch_difference(self, x, y):
        if x.shape != y.shape:
            raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
        B, C, H, W = x.shape
        k, pad = self.window, self.window // 2
        ux = F.unfold(x, k, padding=pad).view(B, C, k * k, H * W)
        uy = F.unfold(y, k, padding=pad).view(B, C, k * k, H * W)
        return ux - uy

    def forward(self, x, y):
        B, C, H, W = x.shape
        diff = self.patch_difference(x, y)  # [B, C, k^2, HW]
        logits = torch.einsum("c,bcjp->bjp", self.query, diff) / (C ** 0.5)
        alpha = logits.softmax(dim=1)
        out = torch.einsum("bjp,bcjp->bcp", alpha, diff)
        return out.view(B, C, H, W)


class MirrorDecoder(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        D = cfg.decoder_dim
        self.n_mask = cfg.num_mask_tokens
        self.obj_token = nn.Parameter(torch.zeros(D))
        self.iou_token = nn.Parameter(torch.zeros(D))
        self.mask_tokens = nn.Parameter(torch.zeros(self.n_mask, D))
        self.mirror_token = nn.Parameter(torch.zeros(D))
        for p in (self.obj_token, self.iou_token, self.mask_tokens,
                  self.mirror_token):
            nn.init.normal_(p, std=0.02)
        self.prompt_encoder = PromptEncoder(D)
        self.layers = nn.ModuleList(
            TwoWayLayer(D, cfg.fdaf_heads) for _ in range(cfg.decoder_rounds))
        # frequency-enhanced feature projected to contrast widths per level
        self.src_to_low = nn.Conv2d(D, cfg.c_low, 1)
        self.src_to_high = nn.Conv2d(D, cfg.c_high, 1)
        self.contrast_low = ContextContrast(cfg.c_low)
        self.contrast_high = ContextContrast(cfg.c_high)
        self.ctx_project_high = nn.Conv2d(cfg.c_high, cfg.c_low, 1)
        self.ctx_refine = nn.Conv2d(cfg.c_low, cfg.c_low, 3, padding=1)
        self.weight_mlp = nn.Sequential(
            nn.Linear(D, D), nn.GELU(),
            nn.Linear(D, D), nn.GELU(),
            nn.Linear(D, cfg.c_low))

    @property
    def mirror_index(self):
        return 2 + self.n_mask

    def assemble_tokens(self, sparse):
        """Concatenate learned tokens ahead of the sparse prompt embeddings."""
        if sparse.dim() == 2:
            sparse = sparse[None]
        B = sparse.shape[0]
        if sparse.shape[-1] != self.mirror_token.shape[0]:
            raise ValueError(f"prompt width {sparse.shape[-1]} != decoder width "
                             f"{self.mirror_token.shape[0]}")
        fixed = torch.cat([
            self.obj_token[None], self.iou_token[None], self.mask_tokens,
            self.mirror_token[None]], dim=0)
        tokens = torch.cat([fixed[None].expand(B, -1, -1), sparse], dim=1)
        return TokenSequence(tokens=tokens, mirror_index=self.mirror_index)

    def decode_tokens(self, seq, f_src):
        """Run two-way attention rounds; returns all outputs and h_mirror."""
        B, D, H, W = f_src.shape
        pe = grid_position_encoding(H, W, D, dtype=f_src.dtype, device=f_src.device)
        image = f_src.flatten(2).transpose(1, 2) + pe[None]
        tokens = seq.tokens
        for layer in self.layers:
            tokens, image = layer(tokens, image)
        return tokens, tokens[:, seq.mirror_index]

    def fuse_contrast(self, ctx_low, ctx_high):
        high = F.interpolate(self.ctx_project_high(ctx_high),
                             size=ctx_low.shape[-2:], mode="bilinear",
                             align_corners=False)
        return self.ctx_refine(ctx_low + high)

    def predict_mirror_mask(self, h_mirror, ctx_fused, out_size):
        """Dot product of the MLP-mapped mirror embedding with the fused contrast."""
        w_mirror = self.weight_mlp(h_mirror)  # [B, C]
        logits = torch.einsum("bc,bchw->bhw", w_mirror, ctx_fused)[:, None]
        logits = F.interpolate(logits, size=out_size, mode="bilinear",
                               align_corners=False)
        return logits, w_mirror

    def forward(self, sparse, f_src, fused_low, fused_high, freq_map, out_size):
        seq = self.assemble_tokens(sparse)
        _, h_mirror = self.decode_tokens(seq, f_src)
        y_low = F.interpolate(self.src_to_low(f_src), size=fused_low.shape[-2:],
                              mode="bilinear", align_corners=False)
        y_high = self.src_to_high(f_src)
        ctx_low = self.contrast_low(fused_low * freq_map, y_low)
        ctx_high = self.contrast_high(fused_high, y_high)
        ctx_fused = self.fuse_contrast(ctx_low, ctx_high)
        logits, w_mirror = self.predict_mirror_mask(h_mirror, ctx_fused, out_size)
        return {
            "logits": logits,
            "h_mirror": h_mirror,
            "w_mirror": w_mirror,
            "ctx_fused": ctx_fused,
            "mirror_index": seq.mirror_index,
        }


def unfold_difference_oracle(x, y, window):
    """Nested-loop patch-difference reference (zero padding, row-major taps)."""
    B, C, H, W = x.shape
    k, pad = window, window // 2
    out = torch.zeros(B, C, k * k, H * W)
    for b in range(B):
        for c in range(C):
            for p in range(H * W):
                py, px = divmod(p, W)
                j = 0
                for dy in range(-pad, pad + 1):
                    for dx in range(-pad, pad + 1):
                        yy, xx = py + dy, px + dx
                        xv = float(x[b, c, yy, xx]) if 0 <= yy < H and 0 <= xx < W else 0.0
                        yv = float(y[b, c, yy, xx]) if 0 <= yy < H and 0 <= xx < W else 0.0
                        out[b, c, j, p] = xv - yv
                        j += 1
    return out
