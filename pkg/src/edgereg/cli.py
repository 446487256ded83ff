"""Command line entry point: ``edgereg register|bench|synth|canny|scene``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import ConfigError, load_config, read_entries
from .errors import EdgeRegError, ParseError
from .formats import atomic_write_text, read_gray, read_rgb, write_pnm
from .geometry import read_intrinsics, read_pose
from .imaging import CannyParams, canny
from .lidar_features import frame_to_text, read_frame
from .pipeline import INITIAL_COLOR, REFINED_COLOR, check_dimensions, draw_overlay, overlay_points, register, report_text
from .synthetic import corridor_scene, perturb, raycast_frames, render_edges, scene_from_entries, scene_to_text

log = logging.getLogger("edgereg")

EXIT_OK = 0
EXIT_IO = 1
EXIT_INSUFFICIENT = 2
EXIT_NUMERICAL = 3
EXIT_NOT_CONVERGED = 4

STATUS_EXIT = {
    "converged": EXIT_OK,
    "insufficient_residuals": EXIT_INSUFFICIENT,
    "numerical_failure": EXIT_NUMERICAL,
    "not_converged": EXIT_NOT_CONVERGED,
}


def _require(value, key, source):
    if value is None:
        raise ConfigError(source, None, f"missing {key}")
    return value


def cmd_register(args) -> int:
    cfg = load_config(args.config)
    image_path = _require(cfg.image, "input.image", args.config)
    intr = read_intrinsics(_require(cfg.intrinsics, "input.intrinsics", args.config))
    pose0 = read_pose(_require(cfg.pose, "input.pose", args.config))
    if not cfg.frames:
        raise ConfigError(args.config, None, "missing input.frames")
    frames = [read_frame(p, i) for i, p in enumerate(cfg.frames)]
    gray = read_gray(image_path)
    rgb = read_rgb(image_path)
    check_dimensions(gray, intr)

    result = register(gray, intr, pose0, frames, cfg)
    out = cfg.output_dir
    atomic_write_text(out / "report.txt", report_text(result))
    atomic_write_text(out / "pose_refined.txt", result.final_pose.to_text())
    edges = result.prepared.edges
    write_pnm(out / "overlay_initial.ppm", draw_overlay(rgb, edges, overlay_points(result, pose0, cfg), INITIAL_COLOR))
    write_pnm(out / "overlay_refined.ppm",
              draw_overlay(rgb, edges, overlay_points(result, result.final_pose, cfg), REFINED_COLOR))
    write_pnm(out / "costmap.pgm", result.prepared.cost_map.to_pgm_array())
    write_pnm(out / "depth.pgm", result.depth.to_pgm_array(), maxval=65535)
    log.info("status %s, outputs in %s", result.status, out)
    return STATUS_EXIT[result.status]


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    rows = bench_mod.run_bench(cfg)
    target = Path(args.output) if args.output else cfg.base_dir / cfg.bench.output
    atomic_write_text(target, bench_mod.rows_to_csv(rows))
    log.info("%d cases written to %s", len(rows), target)
    return EXIT_OK


def _load_scene(path):
    return scene_from_entries(read_entries(path), Path(path))


def cmd_synth(args) -> int:
    spec = _load_scene(args.scenespec)
    out = Path(args.outdir)
    frames = raycast_frames(spec)
    for frame in frames:
        atomic_write_text(out / f"frames/frame_{frame.frame_id:04d}.txt", frame_to_text(frame))
    atomic_write_text(out / "scene.txt", scene_to_text(spec))
    for k, truth in enumerate(spec.camera_poses):
        case = out / f"cam{k}"
        image, edges = render_edges(spec, truth)
        init = perturb(truth, args.rot_deg, args.trans_m, np.random.SeedSequence([spec.seed, 3, k]))
        write_pnm(case / "image.pgm", image.astype(np.uint8))
        write_pnm(case / "edges_true.pgm", edges.mask.astype(np.uint8) * 255)
        atomic_write_text(case / "intrinsics.txt", spec.intrinsics.to_text())
        atomic_write_text(case / "pose_true.txt", truth.to_text())
        atomic_write_text(case / "pose_initial.txt", init.to_text())
        atomic_write_text(case / "register.cfg", "\n".join([
            "input.image = image.pgm",
            "input.intrinsics = intrinsics.txt",
            "input.pose = pose_initial.txt",
            "input.frames = ../frames/frame_*.txt",
            "output.dir = out",
        ]) + "\n")
    log.info("%d frames, %d camera cases written to %s", len(frames), len(spec.camera_poses), out)
    return EXIT_OK


def cmd_scene(args) -> int:
    spec = corridor_scene(args.seed, range_noise=args.range_noise, image_noise=args.image_noise)
    atomic_write_text(args.out, scene_to_text(spec))
    return EXIT_OK


def cmd_canny(args) -> int:
    params = CannyParams(args.low, args.ratio, args.aperture)
    edges = canny(read_gray(args.image), params)
    write_pnm(args.out, edges.mask.astype(np.uint8) * 255)
    log.info("%d edge cells", len(edges))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgereg", description="Edge-based LiDAR-camera pose refinement.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="refine one camera pose from a config file")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("bench", help="run a seeded synthetic sweep and write a CSV")
    p.add_argument("config", type=Path)
    p.add_argument("-o", "--output", help="CSV path (default: bench.output relative to the config)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="raycast and render a scene spec into case directories")
    p.add_argument("scenespec", type=Path)
    p.add_argument("outdir", type=Path)
    p.add_argument("--rot-deg", type=float, default=2.0, help="initial-pose rotation error")
    p.add_argument("--trans-m", type=float, default=0.05, help="initial-pose translation error")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("scene", help="write the scene spec of a seeded corridor")
    p.add_argument("out", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--range-noise", type=float, default=0.0)
    p.add_argument("--image-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_scene)

    defaults = CannyParams()
    p = sub.add_parser("canny", help="run the edge detector alone")
    p.add_argument("image", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--low", type=float, default=defaults.low_threshold)
    p.add_argument("--ratio", type=float, default=defaults.ratio)
    p.add_argument("--aperture", type=int, default=defaults.aperture)
    p.set_defaults(func=cmd_canny)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ParseError, EdgeRegError, ValueError, OSError) as exc:
        print(f"edgereg {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
