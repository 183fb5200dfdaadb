"""Segmentation quality metrics: IoU, F-beta, pixel accuracy, MAE."""

from dataclasses import dataclass

import torch

BETA_SQ = 0.3  # salient-object-detection convention


@dataclass
class MetricReport:
    iou: float
    f_beta: float
    accuracy: float
    mae: float

    def as_row(self):
        return (self.iou, self.f_beta, self.accuracy, self.mae)


def compute_metrics(pred, gt, threshold=0.5):
    """Binarize pred at threshold for IoU/accuracy/F-beta; MAE on raw probs."""
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} "
                         f"vs gt {tuple(gt.shape)}")
    if not torch.all((gt == 0) | (gt == 1)):
        raise ValueError("ground-truth mask must be exactly binary")
    p = (pred >= threshold).float()
    g = gt.float()
    tp = float((p * g).sum())
    fp = float((p * (1 - g)).sum())
    fn = float(((1 - p) * g).sum())
    tn = float(((1 - p) * (1 - g)).sum())
    union = tp + fp + fn
    iou = 1.0 if union == 0 else tp / union
    accuracy = (tp + tn) / (tp + fp + fn + tn)
    if tp == 0:
        f_beta = 1.0 if fp == 0 and fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        f_beta = ((1 + BETA_SQ) * precision * recall
                  / (BETA_SQ * precision + recall))
    mae = float((pred.float() - g).abs().mean())
    return MetricReport(iou=iou, f_beta=f_beta, accuracy=accuracy, mae=mae)


def metrics_oracle(pred, gt, threshold=0.5):
    """Confusion-matrix counting reference via explicit pixel loops."""
    flat_p = pred.reshape(-1).tolist()
    flat_g = gt.reshape(-1).tolist()
    tp = fp = fn = tn = 0
    mae = 0.0
    for pv, gv in zip(flat_p, flat_g):
        b = 1 if pv >= threshold else 0
        if b and gv:
            tp += 1
        elif b and not gv:
            fp += 1
        elif not b and gv:
            fn += 1
        else:
            tn += 1
        mae += abs(pv - gv)
    n = len(flat_p)
    iou = 1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn)
    acc = (tp + tn) / n
    if tp == 0:
        fb = 1.0 if fp == 0 and fn == 0 else 0.0
    else:
        prec, rec = tp / (tp + fp), tp / (tp + fn)
        fb = (1 + BETA_SQ) * prec * rec / (BETA_SQ * prec + rec)
    return MetricReport(iou=iou, f_beta=fb, accuracy=acc, mae=mae / n)
