"""Depth maps from projected LiDAR points and depth-based occlusion culling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cost_map import squared_distance_transform
from .geometry import CameraIntrinsics, Pose, project_points

# culling reasons, in the order they are tested
BEHIND_CAMERA = "behind_camera"
OUT_OF_FRUSTUM = "out_of_frustum"
NO_DEPTH = "no_depth"
OCCLUDED = "occluded"
VISIBLE = "visible"


@dataclass(frozen=True)
class DensifyParams:
    radius: float = 7.0
    neighbours: int = 8
    occlusion_margin: float = 0.3
    bandwidth: float = 3.5


@dataclass(frozen=True)
class VisibilityParams:
    relative_tolerance: float = 0.02
    absolute_tolerance: float = 0.05


@dataclass(frozen=True, eq=False)
class DepthMap:
    depth: np.ndarray
    valid: np.ndarray

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @classmethod
    def empty(cls, width: int, height: int) -> DepthMap:
        return cls(np.zeros((height, width)), np.zeros((height, width), dtype=bool))

    def to_pgm_array(self) -> np.ndarray:
        """Millimetres as 16-bit values; 0 marks missing depth."""
        mm = np.floor(self.depth * 1000.0 + 0.5)
        return np.where(self.valid, np.clip(mm, 1, 65535), 0).astype(np.uint16)


def pixel_index(uv: np.ndarray) -> np.ndarray:
    """Nearest integer pixel ``(u, v)`` of sub-pixel projections."""
    return np.floor(uv + 0.5).astype(np.int64)


def sparse_depth(points: np.ndarray, pose: Pose, intr: CameraIntrinsics) -> DepthMap:
    """Project points and keep the minimum depth per pixel."""
    out = np.full((intr.height, intr.width), np.inf)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points):
        uv, z, front = project_points(intr, pose.apply(points))
        pix = pixel_index(np.nan_to_num(uv, nan=-1.0))
        inside = front & (pix[:, 0] >= 0) & (pix[:, 0] < intr.width) & (pix[:, 1] >= 0) & (pix[:, 1] < intr.height)
        np.minimum.at(out, (pix[inside, 1], pix[inside, 0]), z[inside])
    valid = np.isfinite(out)
    return DepthMap(np.where(valid, out, 0.0), valid)


def densify(sparse: DepthMap, params: DensifyParams | None = None) -> DepthMap:
    """Fill pixels near valid samples with an occlusion-aware Gaussian average.

    For every pixel within ``radius`` of a valid sample, the ``neighbours``
    nearest samples inside the radius are gathered, samples deeper than the
    shallowest of them by more than ``occlusion_margin`` are discarded, and
    the remainder are averaged with Gaussian distance weights.
    """
    params = params or DensifyParams()
    if not sparse.valid.any():
        return DepthMap.empty(sparse.width, sparse.height)
    sites = np.argwhere(sparse.valid)
    site_depth = sparse.depth[sparse.valid]
    near = squared_distance_transform(sparse.valid) <= params.radius ** 2
    targets = np.argwhere(near)
    k = min(params.neighbours, len(sites))
    dist, idx = cKDTree(sites).query(targets, k=k, distance_upper_bound=params.radius + 1e-9)
    dist = dist.reshape(len(targets), k)
    idx = idx.reshape(len(targets), k)
    found = np.isfinite(dist)
    z = np.where(found, site_depth[np.minimum(idx, len(sites) - 1)], np.inf)
    zmin = z.min(axis=1, keepdims=True)
    keep = found & (z <= zmin + params.occlusion_margin)
    w = np.where(keep, np.exp(-np.where(found, dist, 0.0) ** 2 / (2 * params.bandwidth ** 2)), 0.0)
    filled = (w * np.where(keep, z, 0.0)).sum(axis=1) / w.sum(axis=1)
    depth = np.zeros_like(sparse.depth)
    valid = np.zeros_like(sparse.valid)
    depth[targets[:, 0], targets[:, 1]] = filled
    valid[targets[:, 0], targets[:, 1]] = True
    return DepthMap(depth, valid)


def classify(points: np.ndarray, pose: Pose, intr: CameraIntrinsics, depth: DepthMap,
             params: VisibilityParams | None = None):
    """Visibility verdict for each world point.

    Returns ``(reasons, uv, z)`` where ``reasons`` is an object array holding
    one of the reason constants of this module per point.
    """
    params = params or VisibilityParams()
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    uv, z, front = project_points(intr, pose.apply(points))
    reasons = np.full(len(points), VISIBLE, dtype=object)
    reasons[~front] = BEHIND_CAMERA
    pix = pixel_index(np.nan_to_num(uv, nan=-1.0))
    inside = (pix[:, 0] >= 0) & (pix[:, 0] < intr.width) & (pix[:, 1] >= 0) & (pix[:, 1] < intr.height)
    reasons[front & ~inside] = OUT_OF_FRUSTUM
    ok = front & inside
    px, py = pix[ok, 0], pix[ok, 1]
    has_depth = np.zeros(len(points), dtype=bool)
    has_depth[ok] = depth.valid[py, px]
    reasons[ok & ~has_depth] = NO_DEPTH
    map_depth = np.zeros(len(points))
    map_depth[ok] = depth.depth[py, px]
    limit = map_depth * (1.0 + params.relative_tolerance) + params.absolute_tolerance
    reasons[has_depth & (z > limit)] = OCCLUDED
    return reasons, uv, z


def visible(feature, pose: Pose, intr: CameraIntrinsics, depth: DepthMap,
            params: VisibilityParams | None = None) -> tuple[bool, np.ndarray, float]:
    reasons, uv, z = classify(np.asarray(feature).reshape(1, 3), pose, intr, depth, params)
    return reasons[0] == VISIBLE, uv[0], float(z[0])
