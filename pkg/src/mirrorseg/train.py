"""Training loop, checkpoint I/O, evaluation, and inference."""

import dataclasses
import os
import struct

import numpy as np
import torch
from PIL import Image

from .config import ConfigError, RunConfig
from .data import (SceneConfig, VideoClip, prepare_inputs, read_manifest,
                   sample_clip, synthesize_clip)
from .losses import hybrid_loss
from .metrics import compute_metrics
from .model import MirrorSegModel


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


def seed_everything(seed):
    torch.manual_seed(seed)
    np.random.seed(seed % (2 ** 32))


def save_checkpoint(path, model, cfg):
    torch.save({"config": dataclasses.asdict(cfg),
                "state": model.state_dict()}, path)


def load_checkpoint(path, cfg=None):
    blob = torch.load(path, map_location="cpu", weights_only=False)
    ckpt_cfg = RunConfig(**blob["config"])
    if cfg is not None:
        for field in ("input_size", "c_low", "c_high", "decoder_dim",
                      "fdaf_heads", "decoder_rounds", "num_mask_tokens",
                      "corr_radius_low", "corr_radius_high"):
            if getattr(cfg, field) != getattr(ckpt_cfg, field):
                raise ConfigError(
                    f"checkpoint/config mismatch on {field!r}: "
                    f"{getattr(ckpt_cfg, field)} vs {getattr(cfg, field)}")
    model = MirrorSegModel(ckpt_cfg)
    model.load_state_dict(blob["state"])
    model.eval()
    return model, ckpt_cfg


def synthetic_training_clips(cfg, num_clips=4):
    """Small fixed set of prepared synthetic clips, deterministic in cfg.seed."""
    scene = SceneConfig(height=cfg.input_size, width=cfg.input_size,
                        mirror_size=(cfg.input_size // 3, cfg.input_size // 3),
                        drift=(1, 0), appearance_seed=cfg.seed)
    clips = []
    for i in range(num_clips):
        clip = synthesize_clip(scene, seed=cfg.seed * 1000 + i)
        clips.append(prepare_inputs(clip, cfg.input_size))
    return clips


def disk_training_clips(cfg, seed_offset=0):
    videos = read_manifest(cfg.dataset_root)
    clips = []
    for k, (vid, length) in enumerate(sorted(videos.items())):
        rng = np.random.default_rng(cfg.seed + seed_offset + k)
        t = int(rng.integers(1, length - 1))
        clip = sample_clip(cfg.dataset_root, vid, t, seed=cfg.seed + k)
        clips.append(prepare_inputs(clip, cfg.input_size))
    return clips


def train(cfg, out_dir, synthetic=False, num_synthetic_clips=4, model=None,
          log_fn=None):
    """Optimize the pipeline with AdamW; returns (model, loss history)."""
    os.makedirs(out_dir, exist_ok=True)
    seed_everything(cfg.seed)
    if model is None:
        model = MirrorSegModel(cfg)
    model.train()
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr,
                            weight_decay=cfg.weight_decay)
    if synthetic:
        clips = synthetic_training_clips(cfg, num_synthetic_clips)
    else:
        if not cfg.dataset_root:
            raise ConfigError("dataset_root is required unless --synthetic is given")
        clips = disk_training_clips(cfg)

    total_steps = cfg.max_steps if cfg.max_steps > 0 else cfg.epochs * len(clips)
    losses = []
    log_path = os.path.join(out_dir, "loss.log")
    with open(log_path, "w", encoding="utf-8") as log:
        step = 0
        while step < total_steps:
            clip = clips[step % len(clips)]
            outs = model.forward_clip(clip)
            breakdown = hybrid_loss(
                [o["logits"] for o in outs],
                [o["inter_logits"] for o in outs],
                [g[None] for g in clip.gt])
            loss = breakdown.total
            loss_val = float(loss.detach())
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss {loss_val} at step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss_val)
            step += 1
            if step % cfg.log_every == 0:
                log.write(f"{step}\t{loss_val:.6f}\n")
                if log_fn is not None:
                    log_fn(step, loss_val)
            if cfg.checkpoint_every > 0 and step % cfg.checkpoint_every == 0:
                save_checkpoint(os.path.join(out_dir, f"ckpt_{step:06d}.pt"),
                                model, cfg)
    save_checkpoint(os.path.join(out_dir, "ckpt_final.pt"), model, cfg)
    model.eval()
    return model, losses


def clip_iou(model, clip):
    """Mean hard IoU of the final prediction over a prepared clip's frames."""
    model.eval()
    with torch.no_grad():
        outs = model.forward_clip(clip)
    vals = []
    for o, g in zip(outs, clip.gt):
        rep = compute_metrics(torch.sigmoid(o["logits"][0]), g)
        vals.append(rep.iou)
    return sum(vals) / len(vals)


def evaluate(cfg, model, root):
    """Per-video mean metrics over all valid center frames; plus dataset mean."""
    videos = read_manifest(root)
    if not videos:
        raise ConfigError(f"empty manifest under {root}")
    rows = []
    model.eval()
    for vid in sorted(videos):
        length = videos[vid]
        accum = np.zeros(4)
        count = 0
        for t in range(1, length - 1):
            clip = prepare_inputs(sample_clip(root, vid, t, seed=cfg.seed + t),
                                  cfg.input_size)
            with torch.no_grad():
                out = model(clip.rgb[1][None], clip.depth[1][None])
            rep = compute_metrics(torch.sigmoid(out["logits"][0]), clip.gt[1])
            accum += np.array(rep.as_row())
            count += 1
        if count == 0:
            raise ConfigError(f"video {vid!r} too short to evaluate")
        rows.append((vid, *(accum / count)))
    mean = np.mean([r[1:] for r in rows], axis=0)
    rows.append(("mean", *mean))
    return rows


def format_metric_table(rows):
    lines = ["video_id\tiou\tf_beta\taccuracy\tmae"]
    for vid, iou, fb, acc, mae in rows:
        lines.append(f"{vid}\t{iou:.6f}\t{fb:.6f}\t{acc:.6f}\t{mae:.6f}")
    return "\n".join(lines)


def write_logits_dump(path, logits):
    """Raw float32 row-major little-endian dump with an `MSK1 H W` header."""
    arr = logits.detach().cpu().numpy().astype("<f4")
    h, w = arr.shape[-2:]
    with open(path, "wb") as fh:
        fh.write(b"MSK1" + struct.pack("<II", h, w))
        fh.write(arr.reshape(h, w).tobytes())


def predict(cfg, model, input_dir, out_dir, dump_prompts=False,
            dump_intermediate=False, dump_logits=False):
    """Write one mask PNG per valid center frame of every video in input_dir."""
    videos = read_manifest(input_dir)
    os.makedirs(out_dir, exist_ok=True)
    model.eval()
    written = []
    for vid in sorted(videos):
        length = videos[vid]
        vdir = os.path.join(out_dir, vid)
        os.makedirs(vdir, exist_ok=True)
        prompt_lines = []
        for t in range(1, length - 1):
            rgb, depth, _ = _load_rgbd(input_dir, vid, t)
            orig_size = rgb.shape[-2:]
            clip = VideoClip(rgb=[rgb] * 3, depth=[depth] * 3,
                             gt=[torch.zeros(1, *orig_size)] * 3,
                             indices=(t - 1, t, t + 2 if t + 2 < length else 0))
            clip = prepare_inputs(clip, cfg.input_size)
            with torch.no_grad():
                out = model(clip.rgb[1][None], clip.depth[1][None])
            logits = torch.nn.functional.interpolate(
                out["logits"], size=orig_size, mode="bilinear",
                align_corners=False)
            mask = (torch.sigmoid(logits[0, 0]) >= 0.5).numpy()
            path = os.path.join(vdir, f"{t:06d}.png")
            Image.fromarray((mask * 255).astype(np.uint8)).save(path)
            written.append(path)
            if dump_prompts:
                for (x, y), s in zip(out["prompts"][0].coords.tolist(),
                                     out["prompts"][0].scores.tolist()):
                    prompt_lines.append(f"{t} {x:.6f} {y:.6f} {s:.6f}")
            if dump_intermediate:
                inter = torch.sigmoid(out["inter_logits"][0, 0]).numpy()
                Image.fromarray((inter * 255).round().astype(np.uint8)).save(
                    os.path.join(vdir, f"{t:06d}_intermediate.png"))
            if dump_logits:
                write_logits_dump(os.path.join(vdir, f"{t:06d}.msk"),
                                  logits[0, 0])
        if dump_prompts:
            with open(os.path.join(vdir, "prompts.txt"), "w",
                      encoding="utf-8") as fh:
                fh.write("\n".join(prompt_lines) + ("\n" if prompt_lines else ""))
    return written


def _load_rgbd(root, vid, idx):
    from .data import DatasetError, _load_png
    base = os.path.join(root, vid)
    rgb = _load_png(os.path.join(base, "rgb", f"{idx:06d}.png"), "rgb")
    depth_path = os.path.join(base, "depth", f"{idx:06d}.png")
    if not os.path.isfile(depth_path):
        raise DatasetError("missing depth stream (model is RGB-D)", depth_path)
    depth = _load_png(depth_path, "depth")
    return rgb, depth, None
