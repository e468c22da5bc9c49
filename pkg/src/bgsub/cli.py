"""Command-line entry point.

``bgsub run`` segments a directory of frames; ``bgsub synth`` writes a
synthetic sequence (frames + ground truth) in the same layout.  Flags given
without a subcommand are treated as ``run``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import cv2
import numpy as np

from .evaluation import evaluate
from .features import FEATURE_MODES
from .pipeline import VARIANCE_MODES, ConfigError, PipelineConfig, parse_config, process_sequence
from .synth import SCENE_KINDS, SynthSpec, synth_generate

logger = logging.getLogger("bgsub")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm"}


class CliError(Exception):
    pass


def list_images(folder: Path) -> list[Path]:
    if not folder.is_dir():
        raise CliError(f"not a directory: {folder}")
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def read_frame(path: Path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise CliError(f"cannot read frame {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def iter_frames(paths):
    for p in paths:
        yield read_frame(p)


def load_ground_truth(folder: Path, frame_paths: list[Path]) -> dict[int, np.ndarray]:
    """Masks keyed by frame index, matched to frames by file stem."""
    index = {p.stem: i for i, p in enumerate(frame_paths)}
    gt = {}
    for p in list_images(folder):
        if p.stem not in index:
            raise CliError(f"ground-truth mask {p.name} has no matching frame")
        m = cv2.imread(str(p), cv2.IMREAD_GRAYSCALE)
        if m is None:
            raise CliError(f"cannot read mask {p}")
        gt[index[p.stem]] = m > 127
    if len(gt) > len(frame_paths):
        raise CliError("more ground-truth masks than frames")
    return gt


def build_config(args) -> PipelineConfig:
    overrides = dict(features=args.features, variance_mode=args.mode, init_frames=args.init_frames)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        return parse_config(path.read_text(), **overrides)
    return PipelineConfig().with_overrides(**overrides)


def cmd_run(args) -> int:
    cfg = build_config(args)
    paths = list_images(Path(args.input))
    if not paths:
        raise CliError(f"no frames in {args.input}")
    gt = load_ground_truth(Path(args.gt), paths) if args.gt else None
    out = Path(args.out)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    (out / "posteriors").mkdir(parents=True, exist_ok=True)
    results = []
    for res in process_sequence(cfg, iter_frames(paths)):
        stem = paths[res.index].stem
        cv2.imwrite(str(out / "masks" / f"{stem}.png"), res.mask.astype(np.uint8) * 255)
        fg = np.rint(255.0 * (1.0 - res.posterior)).astype(np.uint8)
        cv2.imwrite(str(out / "posteriors" / f"{stem}.png"), fg)
        logger.info("frame %d: %.3fs, search %.2f", res.index, res.seconds, res.search_fraction)
        if gt is not None and res.index in gt:
            if gt[res.index].shape != res.mask.shape:
                raise CliError(f"mask size mismatch at {paths[res.index].name}")
            results.append(res)
    if gt is not None:
        report = evaluate(results, gt)
        if args.report:
            report.write_csv(args.report)
        print(f"evaluated {len(report.frames)} frames, mean F = {report.mean_f:.4f}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(kind=args.kind, seed=args.seed, n_frames=args.frames, height=args.size, width=args.size)
    seq = synth_generate(spec)
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(seq.frames):
        cv2.imwrite(str(out / "frames" / f"{t:05d}.png"), cv2.cvtColor(frame, cv2.COLOR_RGB2BGR))
        if seq.gt[t].any():
            cv2.imwrite(str(out / "gt" / f"{t:05d}.png"), seq.gt[t].astype(np.uint8) * 255)
    print(f"wrote {len(seq)} frames to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgsub", description="Background subtraction with adaptive kernel variances.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="segment a directory of frames")
    run.add_argument("--input", required=True, help="directory of frames, processed in sorted order")
    run.add_argument("--out", required=True, help="output directory (masks/ and posteriors/)")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--gt", help="directory of ground-truth masks named like their frames")
    run.add_argument("--report", help="CSV report path (needs --gt)")
    run.add_argument("--features", choices=FEATURE_MODES)
    run.add_argument("--mode", choices=VARIANCE_MODES)
    run.add_argument("--init-frames", type=int)
    run.set_defaults(func=cmd_run)

    syn = sub.add_parser("synth", help="write a synthetic sequence with ground truth")
    syn.add_argument("--out", required=True)
    syn.add_argument("--kind", choices=SCENE_KINDS, default="dynamic-texture")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--frames", type=int, default=150)
    syn.add_argument("--size", type=int, default=64)
    syn.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help", "--verbose"):
        argv.insert(0, "run")
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    if getattr(args, "report", None) and not args.gt:
        parser.error("--report needs --gt")
    try:
        return args.func(args)
    except (CliError, ConfigError, ValueError) as exc:
        print(f"bgsub: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
