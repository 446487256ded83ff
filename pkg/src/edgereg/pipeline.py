"""End-to-end registration: edges -> cost map -> features -> depth -> solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cost_map as cm
from .config import PipelineConfig
from .depth_occlusion import DepthMap, classify, densify, pixel_index, sparse_depth, VISIBLE
from .errors import InsufficientResiduals
from .geometry import CameraIntrinsics, Pose, project_points
from .imaging import EdgeMap, canny
from .lidar_features import FeatureSet, LidarFrame, aggregate_features
from .pose_optimizer import CULL_REASONS, RegistrationProblem, SolveReport, build_problem, solve

EDGE_COLOR = (0, 0, 255)
INITIAL_COLOR = (255, 0, 0)
REFINED_COLOR = (0, 255, 0)


@dataclass(frozen=True, eq=False)
class Prepared:
    """Pose-independent products of one image and one data unit of frames."""

    edges: EdgeMap
    cost_map: cm.CostMap
    features: FeatureSet
    points: np.ndarray


@dataclass(frozen=True, eq=False)
class RegistrationResult:
    prepared: Prepared
    intrinsics: CameraIntrinsics
    initial_pose: Pose
    depth: DepthMap
    problem: RegistrationProblem | None
    report: SolveReport | None
    status: str
    error: Exception | None = None

    @property
    def final_pose(self) -> Pose:
        return self.report.final_pose if self.report is not None else self.initial_pose


def check_dimensions(image: np.ndarray, intr: CameraIntrinsics) -> None:
    h, w = image.shape[:2]
    if (w, h) != (intr.width, intr.height):
        raise ValueError(f"image is {w}x{h} but intrinsics declare {intr.width}x{intr.height}")


def prepare(image: np.ndarray, frames: list[LidarFrame], cfg: PipelineConfig,
            features: FeatureSet | None = None) -> Prepared:
    edges = canny(image, cfg.canny)
    cost = cm.build(edges, cfg.truncation)
    if features is None:
        features = aggregate_features(frames, cfg.split)
    points = np.concatenate([f.points for f in frames]) if frames else np.zeros((0, 3))
    return Prepared(edges, cost, features, points)


def register_prepared(prep: Prepared, intr: CameraIntrinsics, pose0: Pose, cfg: PipelineConfig) -> RegistrationResult:
    depth = densify(sparse_depth(prep.points, pose0, intr), cfg.densify)
    try:
        problem = build_problem(prep.features, pose0, intr, prep.cost_map, depth, cfg.loss, cfg.solver, cfg.visibility)
    except InsufficientResiduals as exc:
        return RegistrationResult(prep, intr, pose0, depth, None, None, "insufficient_residuals", exc)
    report = solve(problem)
    return RegistrationResult(prep, intr, pose0, depth, problem, report, report.status)


def register(image: np.ndarray, intr: CameraIntrinsics, pose0: Pose, frames: list[LidarFrame],
             cfg: PipelineConfig | None = None, features: FeatureSet | None = None) -> RegistrationResult:
    cfg = cfg or PipelineConfig()
    check_dimensions(image, intr)
    return register_prepared(prepare(image, frames, cfg, features), intr, pose0, cfg)


def report_text(result: RegistrationResult) -> str:
    """The solver report, or a report of the same layout when no solve was attempted."""
    if result.report is not None:
        return result.report.to_text()
    exc = result.error
    culled = getattr(exc, "culled", {})
    lines = [
        f"status = {result.status}",
        "converged = false",
        f"reason = {result.status}",
        "iterations = 0",
        f"total_features = {getattr(exc, 'active', 0) + sum(culled.values())}",
        f"active_residuals = {getattr(exc, 'active', 0)}",
    ]
    lines += [f"culled.{k} = {culled.get(k, 0)}" for k in CULL_REASONS]
    lines.append("initial_pose = " + result.initial_pose.to_text().strip())
    lines.append("final_pose = " + result.initial_pose.to_text().strip())
    return "\n".join(lines) + "\n"


def draw_overlay(rgb: np.ndarray, edges: EdgeMap, uv: np.ndarray, color) -> np.ndarray:
    """Edge cells in blue and each projected point as a 3x3 square of ``color``."""
    out = np.array(rgb, dtype=np.uint8, copy=True)
    out[edges.mask] = EDGE_COLOR
    h, w = out.shape[:2]
    pix = pixel_index(np.asarray(uv).reshape(-1, 2))
    for u, v in pix:
        out[max(v - 1, 0) : min(v + 2, h), max(u - 1, 0) : min(u + 2, w)] = color
    return out


def overlay_points(result: RegistrationResult, pose: Pose, cfg: PipelineConfig) -> np.ndarray:
    """Projections at ``pose`` of the features that were usable at the initial pose."""
    if result.problem is not None:
        pts = result.problem.points
    else:
        reasons, _, _ = classify(result.prepared.features.points, result.initial_pose, result.intrinsics,
                                 result.depth, cfg.visibility)
        pts = result.prepared.features.points[reasons == VISIBLE]
    uv, _, front = project_points(result.intrinsics, pose.apply(pts))
    return uv[front]
