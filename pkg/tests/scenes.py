"""Small hand-built scenes shared by the occlusion tests and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from edgereg.cost_map import CostMap
from edgereg.depth_occlusion import DepthMap, densify, sparse_depth
from edgereg.geometry import CameraIntrinsics, Pose, quat_exp
from edgereg.pose_optimizer import build_problem
from edgereg.synthetic import FORWARD_Y, Patch, Scan, SceneSpec, first_hit, raycast_frames

INTR = CameraIntrinsics(250.0, 250.0, 159.5, 119.5, 320, 240)


@dataclass(frozen=True, eq=False)
class OcclusionCase:
    intrinsics: CameraIntrinsics
    pose: Pose
    patches: tuple
    features: np.ndarray
    depth: DepthMap


def _cloud(patches, scans, resolution=0.05):
    spec = SceneSpec(tuple(patches), INTR, (Pose.identity(),), tuple(scans), resolution)
    return np.concatenate([f.points for f in raycast_frames(spec)])


def _grid(axis, offset, a_range, b_range, step):
    a, b = np.meshgrid(np.arange(*a_range, step), np.arange(*b_range, step), indexing="ij")
    pts = np.zeros((a.size, 3))
    others = [k for k in range(3) if k != axis]
    pts[:, axis] = offset
    pts[:, others[0]] = a.ravel()
    pts[:, others[1]] = b.ravel()
    return pts


def two_planes() -> OcclusionCase:
    """A narrow near wall at 3 m partly hiding a wide far wall at 6 m.

    The scanner sits 0.4 m beside the camera, so it also samples far-wall
    regions the camera cannot see.
    """
    pose = Pose.from_camera_center(FORWARD_Y, [0.0, 0.0, 1.5])
    near = Patch(1, 3.0, (-2.0, 0.0), (0.3, 3.0), 100.0)
    far = Patch(1, 6.0, (-6.0, -1.0), (6.0, 5.0), 200.0)
    scans = [Scan("horizontal", (0.4, 0.0, float(z))) for z in np.arange(0.01, 3.0, 0.02)]
    cloud = _cloud([near, far], scans)
    depth = densify(sparse_depth(cloud, pose, INTR))
    features = np.vstack([
        _grid(1, 3.0, (-1.9, 0.25), (0.2, 2.85), 0.1),
        _grid(1, 6.0, (-3.0, 3.05), (0.2, 2.85), 0.1),
    ])
    return OcclusionCase(INTR, pose, (near, far), features, depth)


def single_plane() -> OcclusionCase:
    """One wall seen obliquely, so depth varies across the image."""
    rot = Pose(quat_exp([0.0, np.radians(20.0), 0.0]), np.zeros(3)).rotation @ FORWARD_Y
    pose = Pose.from_camera_center(rot, [0.0, 0.0, 1.5])
    wall = Patch(1, 5.0, (-8.0, -1.0), (8.0, 4.0), 150.0)
    scans = [Scan("horizontal", (0.2, 0.0, float(z))) for z in np.arange(-0.49, 3.6, 0.02)]
    cloud = _cloud([wall], scans)
    depth = densify(sparse_depth(cloud, pose, INTR))
    grid = _grid(1, 5.0, (-6.0, 6.0), (0.0, 3.0), 0.1)
    uv = INTR.matrix @ pose.apply(grid).T
    uv = (uv[:2] / uv[2]).T
    inside = (uv[:, 0] > 5) & (uv[:, 0] < INTR.width - 6) & (uv[:, 1] > 5) & (uv[:, 1] < INTR.height - 6)
    return OcclusionCase(INTR, pose, (wall,), grid[inside], depth)


def active_points(case: OcclusionCase) -> np.ndarray:
    """Features entering the residual set when every pixel is an edge (cost 0 everywhere)."""
    flat = CostMap(np.zeros((case.intrinsics.height, case.intrinsics.width)))
    return build_problem(case.features, case.pose, case.intrinsics, flat, case.depth).points


def truly_occluded(case: OcclusionCase, points: np.ndarray, margin: float = 1e-6) -> np.ndarray:
    """Ray-cast oracle: something lies between the camera and the point."""
    center = case.pose.center
    offsets = points - center
    dist = np.linalg.norm(offsets, axis=1)
    t, _ = first_hit(center, offsets / dist[:, None], case.patches)
    return t < dist - margin
