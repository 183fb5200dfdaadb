"""Command-line harness: train / evaluate / predict / gradcheck / synth.

Exit codes: 0 success, 2 configuration error, 3 verification failure.
"""

import argparse
import sys

from .config import ConfigError, build_config
from .data import DatasetError, SceneConfig, write_synthetic_dataset


def _add_common(p):
    p.add_argument("--profile", default="toy", choices=("toy", "full"))
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--input-size", type=int, default=None, dest="input_size")
    p.add_argument("--dataset-root", default=None, dest="dataset_root")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None, dest="max_steps")


def _config_from(args):
    overrides = {k: getattr(args, k) for k in
                 ("seed", "input_size", "dataset_root", "lr", "epochs",
                  "max_steps") if hasattr(args, k)}
    return build_config(profile=args.profile, config_file=args.config,
                        **overrides)


def build_parser():
    ap = argparse.ArgumentParser(prog="mirrorseg",
                                 description="RGB-D video mirror segmentation")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the model")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--synthetic", action="store_true",
                   help="train on generated scenes instead of dataset_root")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split-root", required=True, dest="split_root")

    p = sub.add_parser("predict", help="write mask PNGs for a video directory")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input-dir", required=True, dest="input_dir")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-prompts", action="store_true", dest="dump_prompts")
    p.add_argument("--dump-intermediate", action="store_true",
                   dest="dump_intermediate")
    p.add_argument("--dump-logits", action="store_true", dest="dump_logits")

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    _add_common(p)

    p = sub.add_parser("synth", help="emit a synthetic dataset to disk")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--videos", type=int, default=4)
    p.add_argument("--frames", type=int, default=6)
    p.add_argument("--canvas", type=int, default=128)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args):
    from . import train as T

    if args.command == "train":
        cfg = _config_from(args)
        try:
            _, losses = T.train(cfg, args.out, synthetic=args.synthetic,
                                log_fn=lambda s, l: print(f"step {s}  loss {l:.6f}"))
        except T.DivergenceError as exc:
            print(f"training diverged: {exc}", file=sys.stderr)
            return 3
        print(f"done: {len(losses)} steps, final loss {losses[-1]:.6f}")
        return 0

    if args.command == "evaluate":
        cfg = _config_from(args)
        model, _ = T.load_checkpoint(args.checkpoint, cfg)
        rows = T.evaluate(cfg, model, args.split_root)
        print(T.format_metric_table(rows))
        return 0

    if args.command == "predict":
        cfg = _config_from(args)
        model, _ = T.load_checkpoint(args.checkpoint, cfg)
        written = T.predict(cfg, model, args.input_dir, args.out,
                            dump_prompts=args.dump_prompts,
                            dump_intermediate=args.dump_intermediate,
                            dump_logits=args.dump_logits)
        print(f"wrote {len(written)} masks to {args.out}")
        return 0

    if args.command == "gradcheck":
        from .gradcheck import TOL, run_gradcheck
        cfg = _config_from(args)
        report = run_gradcheck(seed=cfg.seed)
        failed = False
        for name, err in report.items():
            status = "pass" if err <= TOL else "FAIL"
            print(f"{name}\t{err:.3e}\t{status}")
            failed = failed or err > TOL
        return 3 if failed else 0

    if args.command == "synth":
        cfg = _config_from(args)
        scene = SceneConfig(height=args.canvas, width=args.canvas,
                            mirror_size=(args.canvas // 4, args.canvas // 4))
        write_synthetic_dataset(args.out, args.videos, args.frames, scene,
                                seed=cfg.seed)
        print(f"wrote {args.videos} videos x {args.frames} frames to {args.out}")
        return 0

    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
