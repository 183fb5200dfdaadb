#!/usr/bin/env python3
"""Generate a synthetic RGB-D mirror video dataset in the on-disk layout.

Equivalent to `mirrorseg synth` but exposes the full scene configuration.

Usage:
    python scripts/make_dataset.py --out data/synth --videos 8 --frames 10
"""

import argparse
import sys

from mirrorseg.data import SceneConfig, write_synthetic_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--videos", type=int, default=4)
    ap.add_argument("--frames", type=int, default=6)
    ap.add_argument("--canvas", type=int, default=128)
    ap.add_argument("--mirrors", type=int, default=1)
    ap.add_argument("--shape", choices=("rectangle", "ellipse"),
                    default="rectangle")
    ap.add_argument("--mirror-size", type=int, default=None)
    ap.add_argument("--drift", type=int, nargs=2, default=(2, 0),
                    metavar=("DX", "DY"))
    ap.add_argument("--depth-offset", type=float, default=0.3)
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    side = args.mirror_size or args.canvas // 4
    cfg = SceneConfig(height=args.canvas, width=args.canvas,
                      num_mirrors=args.mirrors, shape=args.shape,
                      mirror_size=(side, side), drift=tuple(args.drift),
                      depth_offset=args.depth_offset, noise_amp=args.noise)
    write_synthetic_dataset(args.out, args.videos, args.frames, cfg, args.seed)
    print(f"wrote {args.videos} videos x {args.frames} frames to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
