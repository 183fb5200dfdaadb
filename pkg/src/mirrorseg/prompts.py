"""Depth-guided point prompt generation: cascade-fused response map + smart selection."""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

CANDIDATE_POOL = 512


@dataclass
class PointPromptSet:
    """Foreground point prompts with normalized coordinates (x/W, y/H)."""
    coords: torch.Tensor   # [K, 2] in [0,1]
    scores: torch.Tensor   # [K]
    labels: torch.Tensor   # [K], all ones (foreground)
    pixels: torch.Tensor   # [K, 2] integer (x, y) on the response grid

    def __len__(self):
        return self.coords.shape[0]


class ResponseMapHead(nn.Module):
    """Cascade fusion of refined depth features into a single-channel response map."""

    def __init__(self, c_low, c_high):
        super().__init__()
        # bias-free so a zero high-level path degenerates to the low-level path
        self.project_high = nn.Conv2d(c_high, c_low, 1, bias=False)
        self.refine = nn.Sequential(
            nn.Conv2d(c_low, c_low, 3, padding=1),
            nn.GroupNorm(4, c_low),
            nn.GELU(),
            nn.Conv2d(c_low, 1, 3, padding=1),
        )

    def forward(self, refined_low, refined_high):
        high = F.interpolate(self.project_high(refined_high),
                             size=refined_low.shape[-2:],
                             mode="bilinear", align_corners=False)
        return self.refine(refined_low + high)


def select_points(response, max_points, min_dist):
    """Greedy distance-filtered selection from the top-512 response candidates.

    Candidates are visited in descending response order (row-major tie-break);
    a candidate within min_dist (Euclidean, pixels) of an accepted point is
    rejected. If nothing survives (e.g. a fully non-finite map), the map
    center is emitted as a fallback.
    """
    if max_points < 1:
        raise ValueError(f"max_points must be >= 1, got {max_points}")
    if min_dist < 0:
        raise ValueError(f"min_dist must be >= 0, got {min_dist}")
    r = response.detach()
    while r.dim() > 2:
        if r.shape[0] != 1:
            raise ValueError("select_points expects a single map; loop over batch")
        r = r[0]
    H, W = r.shape
    flat = r.reshape(-1)
    finite = torch.isfinite(flat)
    accepted = []
    if finite.any():
        vals = flat.clone()
        vals[~finite] = -math.inf
        order = torch.argsort(vals, descending=True, stable=True)
        order = order[: min(CANDIDATE_POOL, int(finite.sum()))]
        for idx in order.tolist():
            y, x = divmod(idx, W)
            ok = True
            for ax, ay in accepted:
                if (ax - x) ** 2 + (ay - y) ** 2 < min_dist ** 2:
                    ok = False
                    break
            if ok:
                accepted.append((x, y))
                if len(accepted) >= max_points:
                    break
    if not accepted:
        return PointPromptSet(
            coords=torch.tensor([[0.5, 0.5]]),
            scores=torch.zeros(1),
            labels=torch.ones(1),
            pixels=torch.tensor([[W // 2, H // 2]]),
        )
    px = torch.tensor(accepted, dtype=torch.long)
    coords = torch.stack([px[:, 0].float() / W, px[:, 1].float() / H], dim=1)
    scores = r[px[:, 1], px[:, 0]].clone()
    return PointPromptSet(coords=coords, scores=scores,
                          labels=torch.ones(len(accepted)), pixels=px)


def select_points_oracle(response, max_points, min_dist):
    """O(n^2) reference: full sort, pool cut, pairwise-distance greedy scan."""
    r = response.detach()
    while r.dim() > 2:
        r = r[0]
    H, W = r.shape
    cands = [(float(r[y, x]), y * W + x, x, y)
             for y in range(H) for x in range(W)
             if math.isfinite(float(r[y, x]))]
    cands.sort(key=lambda c: (-c[0], c[1]))
    cands = cands[:CANDIDATE_POOL]
    accepted = []
    for _, _, x, y in cands:
        if all(math.hypot(ax - x, ay - y) >= min_dist for ax, ay in accepted):
            accepted.append((x, y))
        if len(accepted) >= max_points:
            break
    if not accepted:
        accepted = [(W // 2, H // 2)]
    return accepted
