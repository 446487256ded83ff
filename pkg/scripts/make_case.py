"""Write a seeded corridor case to disk, register it and report the pose error.

    python scripts/make_case.py 3 /tmp/case3 --rot 2 --trans 0.05
"""

import argparse
from pathlib import Path

from edgereg.cli import main as cli
from edgereg.geometry import center_distance, read_pose, rotation_distance_deg


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("seed", type=int)
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--rot", type=float, default=2.0)
    ap.add_argument("--trans", type=float, default=0.05)
    ap.add_argument("--range-noise", type=float, default=0.0)
    ap.add_argument("--image-noise", type=float, default=0.0)
    args = ap.parse_args()

    scene = args.outdir / "scene.txt"
    args.outdir.mkdir(parents=True, exist_ok=True)
    cli(["scene", str(scene), "--seed", str(args.seed),
         "--range-noise", str(args.range_noise), "--image-noise", str(args.image_noise)])
    cli(["synth", str(scene), str(args.outdir), "--rot-deg", str(args.rot), "--trans-m", str(args.trans)])
    cam = args.outdir / "cam0"
    code = cli(["register", str(cam / "register.cfg")])

    truth = read_pose(cam / "pose_true.txt")
    for name in ("pose_initial.txt", "out/pose_refined.txt"):
        pose = read_pose(cam / name)
        print(f"{name:22s} {rotation_distance_deg(pose, truth):.3f} deg  {center_distance(pose, truth) * 1000:.1f} mm")
    print(f"register exit code {code}; overlays in {cam / 'out'}")


if __name__ == "__main__":
    main()
