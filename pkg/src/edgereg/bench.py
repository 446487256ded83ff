"""Seeded sweeps of synthetic corridor registrations."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields, replace

import numpy as np

from .config import BenchSettings, PipelineConfig
from .geometry import center_distance, rotation_distance_deg
from .pipeline import prepare, register_prepared
from .synthetic import corridor_scene, inject_outliers, perturb, raycast_frames, render_edges, scene_bounds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchRow:
    seed: int
    rot_err_init_deg: float
    trans_err_init_m: float
    rot_err_final_deg: float
    trans_err_final_m: float
    iterations: int
    converged: bool
    status: str

    def within(self, rot_deg: float, trans_m: float) -> bool:
        return self.rot_err_final_deg <= rot_deg and self.trans_err_final_m <= trans_m


CSV_COLUMNS = tuple(f.name for f in fields(BenchRow))


def perturbation_seed(seed: int) -> np.random.SeedSequence:
    """Direction seed shared by every magnitude of a sweep, so magnitudes scale one direction."""
    return np.random.SeedSequence([seed, 3])


def run_seed(seed: int, cfg: PipelineConfig) -> list[BenchRow]:
    """Every configured perturbation of one seeded corridor.

    A case that raises becomes a row with status ``error`` and NaN errors, so
    one bad case never stops a sweep.
    """
    b = cfg.bench
    try:
        spec = corridor_scene(seed, range_noise=b.range_noise, image_noise=b.image_noise,
                              angular_resolution_deg=b.angular_resolution_deg)
        truth = spec.camera_poses[0]
        image, _ = render_edges(spec, truth)
        prep = prepare(image, raycast_frames(spec), cfg)
        if b.outlier_fraction > 0:
            lo, hi = scene_bounds(spec)
            features = inject_outliers(prep.features, b.outlier_fraction, lo, hi, np.random.SeedSequence([seed, 4]))
            prep = replace(prep, features=features)
    except Exception as exc:  # noqa: BLE001 - recorded, not raised
        log.warning("seed %d: scene preparation failed: %s", seed, exc)
        return [_error_row(seed, rot, trans) for rot, trans in b.perturbations]
    rows = []
    for rot, trans in b.perturbations:
        try:
            init = perturb(truth, rot, trans, perturbation_seed(seed))
            res = register_prepared(prep, spec.intrinsics, init, cfg)
        except Exception as exc:  # noqa: BLE001
            log.warning("seed %d, %g deg / %g m: %s", seed, rot, trans, exc)
            rows.append(_error_row(seed, rot, trans))
            continue
        final = res.final_pose
        rows.append(BenchRow(
            seed,
            rotation_distance_deg(init, truth), center_distance(init, truth),
            rotation_distance_deg(final, truth), center_distance(final, truth),
            res.report.iterations if res.report else 0,
            bool(res.report and res.report.converged),
            res.status,
        ))
    return rows


def _error_row(seed, rot, trans) -> BenchRow:
    return BenchRow(seed, rot, trans, float("nan"), float("nan"), 0, False, "error")


def run_bench(cfg: PipelineConfig) -> list[BenchRow]:
    """Rows ordered by perturbation, then seed; identical for any worker count."""
    b = cfg.bench
    seeds = list(range(b.first_seed, b.first_seed + b.seeds))
    if b.workers > 1:
        with ProcessPoolExecutor(max_workers=b.workers) as pool:
            per_seed = list(pool.map(run_seed, seeds, [cfg] * len(seeds)))
    else:
        per_seed = [run_seed(s, cfg) for s in seeds]
    return [rows[k] for k in range(len(b.perturbations)) for rows in per_seed]


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_cell(v) for v in astuple(row)])
    return buf.getvalue()


def _cell(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return value


def read_csv(text: str) -> list[BenchRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        out.append(BenchRow(
            int(rec["seed"]),
            float(rec["rot_err_init_deg"]), float(rec["trans_err_init_m"]),
            float(rec["rot_err_final_deg"]), float(rec["trans_err_final_m"]),
            int(rec["iterations"]), rec["converged"] == "true", rec["status"],
        ))
    return out


def success_rate(rows: list[BenchRow], rot_deg: float, trans_m: float) -> float:
    return sum(r.within(rot_deg, trans_m) for r in rows) / len(rows) if rows else 0.0
