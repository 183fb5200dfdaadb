"""Cross-modal alignment: bidirectional correlation, channel fusion, PAC decoding."""

import torch
import torch.nn as nn
import torch.nn.functional as F

_EPS = 1e-12


class CorrelationVolume:
    """Cosine correlation over a (2r+1)^2 displacement window, channels = K^2."""

    def __init__(self, values, radius):
        self.values = values
        self.radius = radius


def _l2_normalize(f):
    return f / (f.norm(dim=1, keepdim=True) + _EPS)


def _self_correlation(f, r):
    # normalize, downsample x2, upsample back, correlate against the
    # full-resolution normalized feature over the displacement window
    fn = _l2_normalize(f)
    fhat = F.avg_pool2d(fn, 2, ceil_mode=True)
    fup = F.interpolate(fhat, size=fn.shape[-2:], mode="bilinear", align_corners=False)
    B, C, H, W = fn.shape
    pad = F.pad(fup, (r, r, r, r))  # zeros: out-of-bounds displacements contribute 0
    out = []
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out.append((fn * pad[:, :, dy:dy + H, dx:dx + W]).sum(dim=1))
    return torch.stack(out, dim=1)


def joint_correlation(f_img, f_depth, r):
    """Average of the per-modality self-correlation volumes."""
    if f_img.shape[-2:] != f_depth.shape[-2:]:
        raise ValueError(f"spatial mismatch: img {tuple(f_img.shape[-2:])} "
                         f"vs depth {tuple(f_depth.shape[-2:])}")
    if r < 1:
        raise ValueError(f"radius must be >= 1, got {r}")
    c = 0.5 * (_self_correlation(f_img, r) + _self_correlation(f_depth, r))
    return CorrelationVolume(c, r)


def correlation_oracle(f_img, f_depth, r):
    """Nested-loop reference for joint_correlation (same normalize/pool pipeline)."""
    vols = []
    for f in (f_img, f_depth):
        fn = _l2_normalize(f)
        fhat = F.avg_pool2d(fn, 2, ceil_mode=True)
        fup = F.interpolate(fhat, size=fn.shape[-2:], mode="bilinear",
                            align_corners=False)
        B, C, H, W = fn.shape
        K = 2 * r + 1
        vol = torch.zeros(B, K * K, H, W)
        for b in range(B):
            for y in range(H):
                for x in range(W):
                    k = 0
                    for dy in range(-r, r + 1):
                        for dx in range(-r, r + 1):
                            yy, xx = y + dy, x + dx
                            if 0 <= yy < H and 0 <= xx < W:
                                acc = 0.0
                                for ch in range(C):
                                    acc += float(fn[b, ch, y, x]) * float(fup[b, ch, yy, xx])
                                vol[b, k, y, x] = acc
                            k += 1
        vols.append(vol)
    return 0.5 * (vols[0] + vols[1])


class CorrelationFuse(nn.Module):
    """Compress the volume (1x1 + 3x3 conv) and fuse into the modality feature."""

    def __init__(self, feat_ch, corr_ch, mid_ch=None):
        super().__init__()
        mid_ch = mid_ch or feat_ch
        self.compress = nn.Sequential(
            nn.Conv2d(corr_ch, mid_ch, 1),
            nn.Conv2d(mid_ch, mid_ch, 3, padding=1),
        )
        self.fuse = nn.Sequential(
            nn.Conv2d(feat_ch + mid_ch, feat_ch, 1),
            nn.GroupNorm(4, feat_ch),
            nn.ReLU(),
        )

    def forward(self, f, corr):
        if corr.values.shape[-2:] != f.shape[-2:]:
            raise ValueError(f"correlation size {tuple(corr.values.shape[-2:])} "
                             f"!= feature size {tuple(f.shape[-2:])}")
        phi = self.compress(corr.values)
        return self.fuse(torch.cat([f, phi], dim=1))


class PacDecoder(nn.Module):
    """3x3 conv over RGB features with per-pixel Gaussian affinity from depth guidance.

    Guidance is a 1x1 projection of the refined depth feature; the spatial
    kernel at pixel p is modulated by exp(-0.5 * ||g_p - g_q||^2).
    """

    def __init__(self, in_ch, out_ch, guide_ch=8):
        super().__init__()
        self.guide = nn.Conv2d(in_ch, guide_ch, 1)
        self.weight = nn.Parameter(torch.empty(out_ch, in_ch, 3, 3))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        nn.init.kaiming_uniform_(self.weight, a=5 ** 0.5)

    def affinity(self, f_depth):
        g = self.guide(f_depth)
        B, G, H, W = g.shape
        # replicate-pad so border affinities compare against real edge guidance
        gpad = F.pad(g, (1, 1, 1, 1), mode="replicate")
        gu = F.unfold(gpad, 3).view(B, G, 9, H * W)
        diff = gu - g.view(B, G, 1, H * W)
        return torch.exp(-0.5 * (diff ** 2).sum(dim=1))  # [B, 9, HW]

    def forward(self, f_img, f_depth):
        if f_img.shape[-2:] != f_depth.shape[-2:]:
            raise ValueError("pac_decode: spatial mismatch between modalities")
        B, C, H, W = f_img.shape
        fu = F.unfold(f_img, 3, padding=1).view(B, C, 9, H * W)
        aff = self.affinity(f_depth)
        out = torch.einsum("ock,bckp,bkp->bop",
                           self.weight.view(self.weight.shape[0], C, 9), fu, aff)
        out = out + self.bias.view(1, -1, 1)
        return out.view(B, -1, H, W)


class DepthWarpLevel(nn.Module):
    """One pyramid level: correlation -> per-modality fusion -> PAC decode."""

    def __init__(self, img_ch, depth_ch, out_ch, radius):
        super().__init__()
        self.radius = radius
        corr_ch = (2 * radius + 1) ** 2
        self.fuse_img = CorrelationFuse(img_ch, corr_ch)
        self.fuse_depth = CorrelationFuse(depth_ch, corr_ch)
        self.pac = PacDecoder(img_ch, out_ch)

    def forward(self, f_img, f_depth):
        corr = joint_correlation(f_img, f_depth, self.radius)
        refined_img = self.fuse_img(f_img, corr)
        refined_depth = self.fuse_depth(f_depth, corr)
        fused = self.pac(refined_img, refined_depth)
        return refined_img, refined_depth, fused


class DepthWarping(nn.Module):
    """Low- and high-level alignment blocks; fused widths match backbone widths."""

    def __init__(self, cfg):
        super().__init__()
        self.low = DepthWarpLevel(cfg.c_low, cfg.c_low, cfg.c_low, cfg.corr_radius_low)
        self.high = DepthWarpLevel(cfg.c_high, cfg.c_high, cfg.c_high,
                                   cfg.corr_radius_high)

    def forward(self, img_pyr, depth_pyr):
        return {
            "low": self.low(img_pyr.low, depth_pyr.low),
            "high": self.high(img_pyr.high, depth_pyr.high),
        }
