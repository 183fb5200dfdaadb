"""Clip loading, three-frame temporal sampling, and synthetic mirror scenes.

On-disk layout::

    <root>/manifest.tsv                     one "video_id<TAB>num_frames" line per video
    <root>/<video_id>/rgb/%06d.png          8-bit RGB
    <root>/<video_id>/depth/%06d.png        16-bit grayscale
    <root>/<video_id>/mask/%06d.png         8-bit, thresholded at 128
"""

import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image


class DatasetError(Exception):
    """Raised for missing/corrupt dataset files; carries the offending path."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{message}: {path}")
        self.path = path


@dataclass
class VideoClip:
    """Three registered RGB-D frames with ground truth, indices (t-1, t, n)."""
    rgb: list        # three [3,H,W] float tensors in [0,1]
    depth: list      # three [1,H,W] float tensors in [0,1]
    gt: list         # three [1,H,W] {0,1} tensors
    indices: tuple   # (t-1, t, n)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        shapes = {t.shape[-2:] for t in self.rgb + self.depth + self.gt}
        if len(shapes) != 1:
            raise DatasetError(f"clip tensors disagree on spatial size: {shapes}")

    @property
    def size(self):
        return tuple(self.rgb[0].shape[-2:])


@dataclass
class SceneConfig:
    """Synthetic mirror scene parameters (stand-in for real RGB-D mirror data)."""
    height: int = 128
    width: int = 128
    num_mirrors: int = 1
    shape: str = "rectangle"      # or "ellipse"
    mirror_size: tuple = (32, 32)
    drift: tuple = (2, 0)         # (dx, dy) pixels/frame, integer
    depth_offset: float = 0.3
    noise_amp: float = 0.02
    appearance_seed: int = -1  # >= 0: fix background/noise independent of seed

    def __post_init__(self):
        if not (1 <= self.num_mirrors <= 3):
            raise ValueError(f"num_mirrors must be in 1..3, got {self.num_mirrors}")
        if self.shape not in ("rectangle", "ellipse"):
            raise ValueError(f"unknown mirror shape {self.shape!r}")
        mh, mw = self.mirror_size
        if mh <= 0 or mw <= 0 or mh >= self.height or mw >= self.width:
            raise ValueError(f"mirror_size {self.mirror_size} does not fit "
                             f"{self.height}x{self.width} canvas")


def read_manifest(root):
    path = os.path.join(root, "manifest.tsv")
    if not os.path.isfile(path):
        raise DatasetError("missing manifest", path)
    videos = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                vid, n = line.split("\t")
                videos[vid] = int(n)
            except ValueError as exc:
                raise DatasetError(f"malformed manifest line {line!r}", path) from exc
    return videos


def _load_png(path, kind):
    if not os.path.isfile(path):
        raise DatasetError("missing frame file", path)
    arr = np.array(Image.open(path))
    if kind == "rgb":
        if arr.ndim != 3 or arr.shape[2] < 3:
            raise DatasetError(f"expected RGB image, got shape {arr.shape}", path)
        t = torch.from_numpy(arr[:, :, :3].astype(np.float32) / 255.0).permute(2, 0, 1)
    elif kind == "depth":
        if arr.ndim != 2:
            raise DatasetError(f"expected grayscale depth, got shape {arr.shape}", path)
        t = torch.from_numpy(arr.astype(np.float32) / 65535.0)[None]
    else:  # mask
        if arr.ndim == 3:
            arr = arr[:, :, 0]
        t = (torch.from_numpy(arr.astype(np.float32)) >= 128).float()[None]
    return t


def load_frame(root, video_id, idx):
    base = os.path.join(root, video_id)
    rgb = _load_png(os.path.join(base, "rgb", f"{idx:06d}.png"), "rgb")
    depth = _load_png(os.path.join(base, "depth", f"{idx:06d}.png"), "depth")
    mask = _load_png(os.path.join(base, "mask", f"{idx:06d}.png"), "mask")
    for name, t in (("depth", depth), ("mask", mask)):
        if t.shape[-2:] != rgb.shape[-2:]:
            raise DatasetError(
                f"{name} size {tuple(t.shape[-2:])} != rgb size {tuple(rgb.shape[-2:])}",
                os.path.join(base, name, f"{idx:06d}.png"))
    return rgb, depth, mask


def distant_candidates(length, t):
    return [n for n in range(length) if abs(n - t) >= 2]


def sample_clip(root, video_id, t, seed):
    """Load frames (t-1, t, n) with n uniform over indices at distance >= 2."""
    videos = read_manifest(root)
    if video_id not in videos:
        raise DatasetError(f"video {video_id!r} not in manifest",
                           os.path.join(root, "manifest.tsv"))
    length = videos[video_id]
    if length < 3:
        raise DatasetError(f"video {video_id!r} has {length} frames, need >= 3",
                           os.path.join(root, video_id))
    if not (1 <= t < length):
        raise DatasetError(f"t={t} out of range for video of length {length}",
                           os.path.join(root, video_id))
    cands = distant_candidates(length, t)
    if not cands:
        raise DatasetError(f"no distant frame available for t={t}, length={length}",
                           os.path.join(root, video_id))
    rng = np.random.default_rng(seed)
    n = int(cands[rng.integers(len(cands))])
    rgb, depth, gt = [], [], []
    for idx in (t - 1, t, n):
        r, d, g = load_frame(root, video_id, idx)
        rgb.append(r)
        depth.append(d)
        gt.append(g)
    return VideoClip(rgb=rgb, depth=depth, gt=gt, indices=(t - 1, t, n))


def prepare_inputs(clip, target):
    """Resize to target x target and min-max normalize depth per frame.

    RGB/depth are resized bilinearly, gt with nearest-neighbor then
    re-binarized. A constant depth frame becomes all 0.5 and sets a warning.
    """
    if target < 16 or target % 16 != 0:
        raise ValueError(f"target must be >= 16 and divisible by 16, got {target}")
    size = (target, target)
    warnings = list(clip.warnings)
    rgb, depth, gt = [], [], []
    for i in range(3):
        rgb.append(F.interpolate(clip.rgb[i][None], size=size, mode="bilinear",
                                 align_corners=False)[0])
        d = F.interpolate(clip.depth[i][None], size=size, mode="bilinear",
                          align_corners=False)[0]
        lo, hi = d.min(), d.max()
        if hi - lo < 1e-12:
            d = torch.full_like(d, 0.5)
            warnings.append(f"constant depth in frame {i}")
        else:
            d = (d - lo) / (hi - lo)
        depth.append(d)
        g = F.interpolate(clip.gt[i][None], size=size, mode="nearest")[0]
        gt.append((g >= 0.5).float())
    return VideoClip(rgb=rgb, depth=depth, gt=gt, indices=clip.indices,
                     warnings=warnings)


def _mirror_mask(cfg, cy, cx):
    mh, mw = cfg.mirror_size
    mask = np.zeros((cfg.height, cfg.width), dtype=np.float32)
    y0, x0 = cy - mh // 2, cx - mw // 2
    if cfg.shape == "rectangle":
        mask[y0:y0 + mh, x0:x0 + mw] = 1.0
    else:
        yy, xx = np.mgrid[0:cfg.height, 0:cfg.width]
        mask[((yy - cy) / (mh / 2)) ** 2 + ((xx - cx) / (mw / 2)) ** 2 <= 1.0] = 1.0
    return mask, y0, x0


def _render_frames(cfg, seed, times, centers=None):
    """Render the scene at the given drift time steps; shared RNG-driven layout.

    Mirror placement always follows `seed`; appearance (background texture and
    pixel noise) follows `cfg.appearance_seed` when set, so several clips can
    share identical RGB while their mirrors move.
    """
    rng = np.random.default_rng(seed)
    app = np.random.default_rng(cfg.appearance_seed) \
        if cfg.appearance_seed >= 0 else rng
    H, W = cfg.height, cfg.width
    mh, mw = cfg.mirror_size
    dx, dy = int(cfg.drift[0]), int(cfg.drift[1])

    # horizontally symmetric smooth background: the reflection inside a mirror
    # is then the flipped copy of the source region mirrored about the canvas
    # axis, which matches the surroundings exactly -- mirrors are invisible in
    # RGB and only the depth discontinuity gives them away
    coarse = app.random((H // 8 + 2, W // 8 + 2)).astype(np.float32)
    smooth = np.asarray(Image.fromarray(coarse).resize((W, H), Image.BILINEAR))
    bg = 0.5 * (smooth + smooth[:, ::-1])  # bg[:, x] == bg[:, W-1-x]
    bg_rgb = np.stack([bg * app.uniform(0.4, 1.0) + app.uniform(0.0, 0.2)
                       for _ in range(3)])
    yy = np.linspace(0.2, 0.8, H, dtype=np.float32)[:, None]
    bg_depth = np.broadcast_to(yy, (H, W)).copy()

    # mirror centers stay >= 1 px inside the frame at every rendered time
    if centers is None:
        max_t = max(times)
        margin_y, margin_x = mh // 2 + 1, mw // 2 + 1
        lo_y = margin_y + max(0, -dy * max_t)
        hi_y = H - margin_y - mh % 2 - max(0, dy * max_t)
        lo_x = margin_x + max(0, -dx * max_t)
        hi_x = W - margin_x - mw % 2 - max(0, dx * max_t)
        if hi_y <= lo_y or hi_x <= lo_x:
            raise ValueError("drift pushes mirror out of frame for this canvas")
        centers = [(int(rng.integers(lo_y, hi_y + 1)),
                    int(rng.integers(lo_x, hi_x + 1)))
                   for _ in range(cfg.num_mirrors)]

    frames = []
    for tstep in times:
        img = bg_rgb.copy()
        dep = bg_depth.copy()
        mask = np.zeros((H, W), dtype=np.float32)
        for cy0, cx0 in centers:
            cy, cx = cy0 + dy * tstep, cx0 + dx * tstep
            m, y0, x0 = _mirror_mask(cfg, cy, cx)
            # reflection: flipped copy of the region mirrored about the canvas axis
            sy, sx = y0, W - mw - x0
            patch = bg_rgb[:, sy:sy + mh, sx:sx + mw][:, :, ::-1]
            region = m[y0:y0 + mh, x0:x0 + mw]
            img[:, y0:y0 + mh, x0:x0 + mw] = (
                region * patch + (1 - region) * img[:, y0:y0 + mh, x0:x0 + mw])
            dep[m > 0] = np.clip(dep[m > 0] + cfg.depth_offset, 0.0, 1.0)
            mask = np.maximum(mask, m)
        img = np.clip(img + app.normal(0, cfg.noise_amp, img.shape), 0.0, 1.0)
        frames.append((torch.from_numpy(img.astype(np.float32)),
                       torch.from_numpy(dep.astype(np.float32))[None],
                       torch.from_numpy(mask)[None]))
    return frames


def synthesize_clip(cfg, seed):
    """Three-frame drifting mirror clip with indices (0, 1, 4)."""
    frames = _render_frames(cfg, seed, times=(0, 1, 4))
    rgb, depth, gt = zip(*frames)
    return VideoClip(rgb=list(rgb), depth=list(depth), gt=list(gt), indices=(0, 1, 4))


def write_frame(root, video_id, idx, rgb, depth, mask):
    base = os.path.join(root, video_id)
    for sub in ("rgb", "depth", "mask"):
        os.makedirs(os.path.join(base, sub), exist_ok=True)
    rgb8 = (rgb.clamp(0, 1).numpy() * 255).round().astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(rgb8).save(os.path.join(base, "rgb", f"{idx:06d}.png"))
    d16 = (depth[0].clamp(0, 1).numpy() * 65535).round().astype(np.uint16)
    Image.fromarray(d16).save(os.path.join(base, "depth", f"{idx:06d}.png"))
    m8 = (mask[0].numpy() * 255).round().astype(np.uint8)
    Image.fromarray(m8).save(os.path.join(base, "mask", f"{idx:06d}.png"))


def write_synthetic_dataset(root, num_videos, frames_per_video, cfg, seed):
    """Emit a drifting-mirror dataset in the documented layout, plus manifest."""
    os.makedirs(root, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = []
    for v in range(num_videos):
        vid = f"synth{v:03d}"
        vseed = int(rng.integers(2 ** 31))
        frames = _render_frames(cfg, vseed, times=range(frames_per_video))
        for idx, (r, d, g) in enumerate(frames):
            write_frame(root, vid, idx, r, d, g)
        lines.append(f"{vid}\t{frames_per_video}")
    with open(os.path.join(root, "manifest.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
