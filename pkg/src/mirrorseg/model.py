"""End-to-end mirror segmentation network wiring all submodules together."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbone import TwoStreamBackbone
from .decoder import MirrorDecoder
from .depth_warp import DepthWarping
from .fdaf import FDAF
from .prompts import ResponseMapHead, select_points


class MirrorSegModel(nn.Module):
    """Backbone -> depth warping -> point prompts -> frequency fusion -> decoder.

    `ablate_dw` / `ablate_fdaf` switch the respective module to an identity
    passthrough (used for the directional ablation check).
    """

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        self.backbone = TwoStreamBackbone(cfg)
        self.dw = DepthWarping(cfg)
        self.ppg = ResponseMapHead(cfg.c_low, cfg.c_high)
        self.fdaf = FDAF(cfg)
        self.decoder = MirrorDecoder(cfg)
        self.ablate_dw = False
        self.ablate_fdaf = False

    def forward(self, rgb, depth):
        """rgb [B,3,H,W], depth [B,1,H,W]; returns logits at input resolution."""
        out_size = rgb.shape[-2:]
        img_pyr = self.backbone.extract_features(rgb, "rgb")
        dep_pyr = self.backbone.extract_features(depth, "depth")

        if self.ablate_dw:
            warped = {"low": (img_pyr.low, dep_pyr.low, img_pyr.low),
                      "high": (img_pyr.high, dep_pyr.high, img_pyr.high)}
        else:
            warped = self.dw(img_pyr, dep_pyr)
        _, rdep_low, fused_low = warped["low"]
        _, rdep_high, fused_high = warped["high"]

        response = self.ppg(rdep_low, rdep_high)
        prompt_sets = [select_points(response[b], self.cfg.num_prompts,
                                     self.cfg.min_point_dist)
                       for b in range(response.shape[0])]
        # pad to a common count so the batch stacks (fallback repeats last point)
        max_k = max(len(ps) for ps in prompt_sets)
        coords = torch.stack(
            [torch.cat([ps.coords,
                        ps.coords[-1:].expand(max_k - len(ps), 2)], dim=0)
             for ps in prompt_sets]).to(rgb.dtype).to(rgb.device)

        fd = self.fdaf(fused_low, fused_high)
        if self.ablate_fdaf:
            enhanced = self.fdaf.memory_tokens(fused_high)
            freq_map = torch.ones_like(fd["freq_map"])
        else:
            enhanced = fd["enhanced"]
            freq_map = fd["freq_map"]

        hh, wh = fused_high.shape[-2:]
        f_src = enhanced.transpose(1, 2).reshape(
            enhanced.shape[0], -1, hh, wh)

        sparse = self.decoder.prompt_encoder(coords)
        dec = self.decoder(sparse, f_src, fused_low, fused_high, freq_map,
                           out_size)
        inter_logits = F.interpolate(fd["inter_logits"], size=out_size,
                                     mode="bilinear", align_corners=False)
        return {
            "logits": dec["logits"],           # [B,1,H,W] final mirror logits
            "inter_logits": inter_logits,      # [B,1,H,W] intermediate map
            "response": response,
            "prompts": prompt_sets,
            "h_mirror": dec["h_mirror"],
            "w_mirror": dec["w_mirror"],
        }

    def forward_clip(self, clip, device=None):
        """Run the three frames of a prepared clip; returns per-frame outputs."""
        outs = []
        for i in range(3):
            rgb = clip.rgb[i][None]
            dep = clip.depth[i][None]
            if device is not None:
                rgb, dep = rgb.to(device), dep.to(device)
            outs.append(self(rgb, dep))
        return outs
