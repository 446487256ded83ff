"""Seeded corridor sweep with success rates at the usual tolerances.

    python scripts/run_sweep.py --seeds 20 --range-noise 0.005 --image-noise 2
    python scripts/run_sweep.py --outliers 0.2 --loss none --csv none.csv
"""

import argparse
import time
from pathlib import Path

import numpy as np

from edgereg.bench import rows_to_csv, run_bench, success_rate
from edgereg.config import BenchSettings, PipelineConfig
from edgereg.pose_optimizer import RobustLoss


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--rot", type=float, nargs="+", default=[2.0], help="rotation perturbations in degrees")
    ap.add_argument("--trans", type=float, nargs="+", default=[0.05], help="translation perturbations in metres")
    ap.add_argument("--range-noise", type=float, default=0.0)
    ap.add_argument("--image-noise", type=float, default=0.0)
    ap.add_argument("--outliers", type=float, default=0.0, help="fraction of features replaced by outliers")
    ap.add_argument("--loss", choices=["huber", "cauchy", "none"], default="huber")
    ap.add_argument("--loss-scale", type=float, default=3.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", type=Path)
    args = ap.parse_args()
    if len(args.rot) != len(args.trans):
        ap.error("--rot and --trans need the same number of values")

    settings = BenchSettings(
        seeds=args.seeds, first_seed=args.first_seed, perturbations=tuple(zip(args.rot, args.trans)),
        range_noise=args.range_noise, image_noise=args.image_noise, outlier_fraction=args.outliers,
        workers=args.workers,
    )
    cfg = PipelineConfig(loss=RobustLoss(args.loss, args.loss_scale), bench=settings)
    start = time.perf_counter()
    rows = run_bench(cfg)
    elapsed = time.perf_counter() - start

    for r in rows:
        print(f"seed {r.seed:3d}  init {r.rot_err_init_deg:.2f} deg {r.trans_err_init_m * 100:.1f} cm  ->  "
              f"{r.rot_err_final_deg:.3f} deg {r.trans_err_final_m * 1000:.1f} mm  it={r.iterations} {r.status}")
    rot = np.array([r.rot_err_final_deg for r in rows])
    trans = np.array([r.trans_err_final_m for r in rows])
    print(f"\n{len(rows)} cases in {elapsed:.1f} s")
    print(f"median error {np.nanmedian(rot):.3f} deg, {np.nanmedian(trans) * 1000:.1f} mm")
    for tol in ((0.2, 0.01), (0.5, 0.03)):
        print(f"within {tol[0]} deg / {tol[1] * 100:g} cm: {success_rate(rows, *tol):.0%}")
    if args.csv:
        args.csv.write_text(rows_to_csv(rows))


if __name__ == "__main__":
    main()
