"""Pose refinement against a cost map by robust Levenberg-Marquardt.

Every active feature contributes one scalar residual: the cost map value
at its projection.  The objective is ``0.5 * sum(rho(r_i ** 2))``.  Robust
losses are applied by rescaling residuals and Jacobian rows by
``sqrt(rho'(r_i ** 2))`` (iteratively reweighted least squares).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cost_map import CostMap
from .depth_occlusion import VISIBLE, DepthMap, VisibilityParams, classify
from .errors import InsufficientResiduals
from .geometry import CameraIntrinsics, Pose, project_jacobians, project_points
from .lidar_features import FeatureSet

log = logging.getLogger(__name__)

MIN_RESIDUALS = 6
SATURATED = "saturated"
CULL_REASONS = ("behind_camera", "out_of_frustum", "no_depth", "occluded", SATURATED)

# Edge cell (i, j) from the 2x2 stencil is centred at pixel (j + 0.5, i + 0.5).
EDGE_CELL_OFFSET = 0.5


@dataclass(frozen=True)
class RobustLoss:
    kind: str = "huber"
    scale: float = 3.0

    def __post_init__(self):
        if self.kind not in ("huber", "cauchy", "none"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind != "none" and not self.scale > 0:
            raise ValueError(f"loss scale must be positive, got {self.scale}")

    def __call__(self, s: np.ndarray):
        """``rho(s)`` and ``rho'(s)`` of the squared residual ``s``."""
        s = np.asarray(s, dtype=np.float64)
        if self.kind == "none":
            return s, np.ones_like(s)
        a2 = self.scale * self.scale
        if self.kind == "huber":
            root = np.sqrt(np.maximum(s, a2))
            inlier = s <= a2
            return np.where(inlier, s, 2.0 * self.scale * root - a2), np.where(inlier, 1.0, self.scale / root)
        return a2 * np.log1p(s / a2), 1.0 / (1.0 + s / a2)


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 50
    step_tolerance: float = 1e-8
    cost_tolerance: float = 1e-10
    initial_damping: float = 1e-4
    damping_increase: float = 10.0
    damping_decrease: float = 0.1
    min_diagonal: float = 1e-6


@dataclass(frozen=True, eq=False)
class RegistrationProblem:
    points: np.ndarray
    cost_map: CostMap
    intrinsics: CameraIntrinsics
    initial_pose: Pose
    loss: RobustLoss = RobustLoss()
    settings: SolverSettings = SolverSettings()
    culled: dict = field(default_factory=dict)
    active_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    pixel_offset: float = EDGE_CELL_OFFSET

    @property
    def total_features(self) -> int:
        return len(self.points) + sum(self.culled.values())


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: float
    step_norm: float
    damping: float
    accepted: bool


@dataclass(frozen=True, eq=False)
class SolveReport:
    initial_pose: Pose
    final_pose: Pose
    initial_cost: float
    final_cost: float
    iterations: int
    active_residuals: int
    culled: dict
    converged: bool
    reason: str
    history: tuple = ()

    @property
    def total_features(self) -> int:
        return self.active_residuals + sum(self.culled.values())

    @property
    def status(self) -> str:
        return "numerical_failure" if self.reason == "numerical_failure" else "converged" if self.converged else "not_converged"

    def to_text(self) -> str:
        lines = [
            f"status = {self.status}",
            f"converged = {str(self.converged).lower()}",
            f"reason = {self.reason}",
            f"iterations = {self.iterations}",
            f"initial_cost = {self.initial_cost:.17g}",
            f"final_cost = {self.final_cost:.17g}",
            f"total_features = {self.total_features}",
            f"active_residuals = {self.active_residuals}",
        ]
        lines += [f"culled.{k} = {self.culled.get(k, 0)}" for k in CULL_REASONS]
        lines.append("initial_pose = " + self.initial_pose.to_text().strip())
        lines.append("final_pose = " + self.final_pose.to_text().strip())
        for h in self.history:
            lines.append(
                f"iteration.{h.iteration} = {h.cost:.17g} {h.step_norm:.17g} {h.damping:.17g} {int(h.accepted)}"
            )
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, str]:
    """Flat ``key = value`` report lines into a dict of strings."""
    out = {}
    for line in text.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def build_problem(features: FeatureSet | np.ndarray, pose0: Pose, intr: CameraIntrinsics, cost_map: CostMap,
                  depth_map: DepthMap, loss: RobustLoss | None = None, settings: SolverSettings | None = None,
                  visibility: VisibilityParams | None = None, pixel_offset: float = EDGE_CELL_OFFSET,
                  min_residuals: int = MIN_RESIDUALS) -> RegistrationProblem:
    """Select the residual set at the initial pose.

    A feature is active when it is visible in the depth map and its
    projection lands inside the cost map with cost below the truncation.
    """
    points = features.points if isinstance(features, FeatureSet) else np.asarray(features, dtype=np.float64).reshape(-1, 3)
    shape = (intr.height, intr.width)
    if cost_map.cost.shape != shape:
        raise ValueError(f"cost map is {cost_map.width}x{cost_map.height}, intrinsics {intr.width}x{intr.height}")
    if depth_map.depth.shape != shape:
        raise ValueError(f"depth map is {depth_map.width}x{depth_map.height}, intrinsics {intr.width}x{intr.height}")
    reasons, uv, _ = classify(points, pose0, intr, depth_map, visibility)
    vis = reasons == VISIBLE
    grid = uv - pixel_offset
    in_grid = vis & np.where(vis, cost_map.contains(np.nan_to_num(grid, nan=-1.0)), False)
    reasons[vis & ~in_grid] = "out_of_frustum"
    costs = np.full(len(points), np.inf)
    if in_grid.any():
        costs[in_grid] = cost_map.sample_many(grid[in_grid])
    reasons[in_grid & (costs >= cost_map.truncation)] = SATURATED
    active = np.flatnonzero(reasons == VISIBLE)
    culled = {k: int(np.sum(reasons == k)) for k in CULL_REASONS}
    if len(active) < min_residuals:
        raise InsufficientResiduals(len(active), min_residuals, culled)
    return RegistrationProblem(points[active], cost_map, intr, pose0, loss or RobustLoss(),
                               settings or SolverSettings(), culled, active, pixel_offset)


def residual_and_jacobian(problem: RegistrationProblem, pose: Pose):
    """Raw cost residuals (N,) and their (N, 6) Jacobian at ``pose``.

    Features whose projection leaves the cost map get the truncation value
    and a zero Jacobian row.
    """
    cmap = problem.cost_map
    uv, _, front = project_points(problem.intrinsics, pose.apply(problem.points))
    grid = uv - problem.pixel_offset
    inside = front & cmap.contains(np.nan_to_num(grid, nan=-1.0))
    r = np.full(len(problem.points), cmap.truncation)
    jac = np.zeros((len(problem.points), 6))
    if inside.any():
        r[inside] = cmap.sample_many(grid[inside])
        grad = cmap.gradient_many(grid[inside])
        pj = project_jacobians(problem.intrinsics, pose, problem.points[inside])
        jac[inside] = np.einsum("ni,nij->nj", grad, pj)
    return r, jac


def total_cost(problem: RegistrationProblem, residuals: np.ndarray) -> float:
    rho, _ = problem.loss(residuals * residuals)
    return 0.5 * float(np.sum(rho))


def solve(problem: RegistrationProblem) -> SolveReport:
    s = problem.settings
    pose = problem.initial_pose
    r, jac = residual_and_jacobian(problem, pose)
    cost = initial_cost = total_cost(problem, r)
    damping = s.initial_damping
    history = []
    iterations = 0
    converged, reason = False, "max_iterations"

    while iterations < s.max_iterations:
        if cost == 0.0:
            converged, reason = True, "zero_cost"
            break
        _, drho = problem.loss(r * r)
        weighted = jac * drho[:, None]
        hessian = jac.T @ weighted
        gradient = weighted.T @ r
        if not (np.all(np.isfinite(hessian)) and np.all(np.isfinite(gradient))):
            reason = "numerical_failure"
            break
        if not np.any(gradient):
            converged, reason = True, "zero_gradient"
            break
        diag = np.clip(np.diag(hessian), s.min_diagonal, None)
        try:
            step = np.linalg.solve(hessian + damping * np.diag(diag), -gradient)
        except np.linalg.LinAlgError:
            step = np.full(6, np.nan)
        if not np.all(np.isfinite(step)):
            reason = "numerical_failure"
            break
        step_norm = float(np.linalg.norm(step))
        if step_norm < s.step_tolerance:
            converged, reason = True, "step_norm"
            break
        iterations += 1
        candidate = pose.retract(step)
        r_new, jac_new = residual_and_jacobian(problem, candidate)
        new_cost = total_cost(problem, r_new)
        accepted = new_cost < cost
        history.append(IterationRecord(iterations, new_cost if accepted else cost, step_norm, damping, accepted))
        log.info("iter %3d  cost %.6g  step %.3e  lambda %.1e  %s", iterations, new_cost, step_norm, damping,
                 "accepted" if accepted else "rejected")
        if accepted:
            decrease = (cost - new_cost) / cost
            pose, r, jac, cost = candidate, r_new, jac_new, new_cost
            damping *= s.damping_decrease
            if decrease < s.cost_tolerance:
                converged, reason = True, "cost_decrease"
                break
        else:
            damping *= s.damping_increase

    return SolveReport(problem.initial_pose, pose, initial_cost, cost, iterations, len(problem.points),
                       dict(problem.culled), converged, reason, tuple(history))
