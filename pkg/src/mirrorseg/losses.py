"""Hybrid BCE + soft-IoU training objective over the three sampled frames."""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

SMOOTH = 1.0


@dataclass
class FrameLoss:
    bce_final: torch.Tensor
    iou_final: torch.Tensor
    bce_inter: torch.Tensor
    iou_inter: torch.Tensor


@dataclass
class LossBreakdown:
    total: torch.Tensor
    per_frame: list  # three FrameLoss entries for frames (t-1, t, n)


def _check_binary(g):
    if not torch.all((g == 0) | (g == 1)):
        raise ValueError("ground-truth mask must be exactly binary")


def bce_loss(logits, gt):
    return F.binary_cross_entropy_with_logits(logits, gt)


def soft_iou_loss(logits, gt):
    p = torch.sigmoid(logits)
    inter = (p * gt).sum()
    union = p.sum() + gt.sum() - inter
    return 1.0 - (inter + SMOOTH) / (union + SMOOTH)


def hybrid_loss(final_logits, inter_logits, gts):
    """Sum of BCE + soft IoU on both prediction maps for each of three frames.

    Intermediate maps are bilinearly upsampled to the ground-truth size first.
    """
    if not (len(final_logits) == len(inter_logits) == len(gts) == 3):
        raise ValueError("expected three frames of predictions and ground truth")
    per_frame = []
    total = None
    for m, p, g in zip(final_logits, inter_logits, gts):
        _check_binary(g)
        if m.shape[-2:] != g.shape[-2:]:
            raise ValueError(f"final logits size {tuple(m.shape[-2:])} "
                             f"!= gt size {tuple(g.shape[-2:])}")
        if p.shape[-2:] != g.shape[-2:]:
            p = F.interpolate(p, size=g.shape[-2:], mode="bilinear",
                              align_corners=False)
        fl = FrameLoss(bce_final=bce_loss(m, g), iou_final=soft_iou_loss(m, g),
                       bce_inter=bce_loss(p, g), iou_inter=soft_iou_loss(p, g))
        per_frame.append(fl)
        s = fl.bce_final + fl.iou_final + fl.bce_inter + fl.iou_inter
        total = s if total is None else total + s
    return LossBreakdown(total=total, per_frame=per_frame)


def hybrid_loss_oracle(final_logits, inter_logits, gts):
    """Per-pixel scalar-loop reference for the hybrid loss."""
    total = 0.0
    for m, p, g in zip(final_logits, inter_logits, gts):
        if p.shape[-2:] != g.shape[-2:]:
            p = F.interpolate(p, size=g.shape[-2:], mode="bilinear",
                              align_corners=False)
        for logits in (m, p):
            flat_x = logits.reshape(-1).tolist()
            flat_g = g.reshape(-1).tolist()
            bce = 0.0
            inter = union = psum = gsum = 0.0
            for x, gv in zip(flat_x, flat_g):
                prob = 1.0 / (1.0 + math.exp(-x))
                prob = min(max(prob, 1e-12), 1 - 1e-12)
                bce += -(gv * math.log(prob) + (1 - gv) * math.log(1 - prob))
                inter += prob * gv
                psum += prob
                gsum += gv
            bce /= len(flat_x)
            union = psum + gsum - inter
            total += bce + (1.0 - (inter + SMOOTH) / (union + SMOOTH))
    return total
