import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgereg.config import parse_entries
from edgereg.cost_map import build
from edgereg.geometry import CameraIntrinsics, Pose, rotation_distance_deg, center_distance
from edgereg.imaging import canny
from edgereg.lidar_features import extract_features
from edgereg.synthetic import (
    FORWARD_Y,
    Patch,
    Scan,
    SceneSpec,
    corridor_scene,
    first_hit,
    inject_outliers,
    make_case,
    perturb,
    raycast_frames,
    render_edges,
    scene_bounds,
    scene_from_entries,
    scene_to_text,
)
from edgereg.lidar_features import FeatureSet

SMALL = CameraIntrinsics(120.0, 120.0, 39.5, 29.5, 80, 60)


def scene(patches, scans=(), resolution=0.1, **kw):
    return SceneSpec(tuple(patches), SMALL, (Pose.identity(),), tuple(scans), resolution, **kw)


@pytest.fixture(scope="module")
def corridor():
    return corridor_scene(0)


# -- raycasting -----------------------------------------------------------------------------

def test_single_wall_gives_one_collinear_chain():
    wall = Patch(1, 4.0, (-3.0, -1.0), (3.0, 1.0), 100.0)
    (frame,) = raycast_frames(scene([wall], [Scan("horizontal", (0.0, 0.0, 0.0))]))
    pts = frame.points
    assert len(pts) > 100 and np.allclose(pts[:, 1], 4.0) and np.allclose(pts[:, 2], 0.0)
    step = np.diff(pts[:, 0])
    assert np.all(step > 0) or np.all(step < 0)  # angular order sweeps the wall monotonically
    assert len(extract_features(frame)) == 0


def test_corner_junction_matches_analytic_corner():
    walls = [Patch(0, 2.0, (-3.0, -1.0), (1.0, 1.0), 100.0), Patch(1, 1.0, (-3.0, -1.0), (2.0, 1.0), 160.0)]
    res = 0.1
    (frame,) = raycast_frames(scene(walls, [Scan("horizontal", (0.0, 0.0, 0.5))], res))
    feats = extract_features(frame).points
    corner = np.array([2.0, 1.0, 0.5])
    spacing = np.linalg.norm(corner[:2]) * np.radians(res)
    d = np.linalg.norm(feats - corner, axis=1)
    assert len(feats) == 1 and d.min() <= 2 * spacing


def test_empty_scene_has_empty_frames():
    frames = raycast_frames(scene([], [Scan("horizontal", (0, 0, 0)), Scan("profile", (1, 2, 3))]))
    assert [len(f) for f in frames] == [0, 0]


def test_first_hit_prefers_nearest():
    near, far = Patch(2, 1.0, (-1, -1), (1, 1), 1.0), Patch(2, 3.0, (-1, -1), (1, 1), 2.0)
    t, ids = first_hit(np.zeros(3), np.array([[0, 0, 1.0], [0, 0, -1.0], [0.9, 0, 1.0]]), [far, near])
    assert t[0] == 1.0 and ids[0] == 1 and ids[1] == -1 and np.isinf(t[1])
    assert ids[2] == 1


def test_range_noise_is_seeded():
    wall = Patch(1, 4.0, (-3.0, -1.0), (3.0, 1.0), 100.0)
    s = scene([wall], [Scan("horizontal", (0.0, 0.0, 0.0))], range_noise=0.005, seed=3)
    a, b = raycast_frames(s)[0].points, raycast_frames(s)[0].points
    assert np.array_equal(a, b) and not np.allclose(a[:, 1], 4.0)
    assert np.std(np.linalg.norm(a, axis=1) - np.linalg.norm(raycast_frames(scene([wall], s.scans))[0].points, axis=1)) \
        == pytest.approx(0.005, rel=0.2)


# -- rendering ------------------------------------------------------------------------------

def test_patch_filling_frame_has_edges_only_at_silhouette():
    # a wall 2 m ahead much larger than the view: no edges at all
    big = Patch(2, 2.0, (-10, -10), (10, 10), 200.0)
    _, edges = render_edges(scene([big]), Pose.identity())
    assert len(edges) == 0
    # a smaller square: edges trace its outline only
    sq = Patch(2, 2.0, (-0.3, -0.2), (0.3, 0.2), 200.0)
    img, edges = render_edges(scene([sq]), Pose.identity())
    u0, u1 = 39.5 + 120 * np.array([-0.3, 0.3]) / 2
    v0, v1 = 29.5 + 120 * np.array([-0.2, 0.2]) / 2
    px = edges.pixels
    near_side = (np.abs(px[:, 0] + 0.5 - u0) <= 1) | (np.abs(px[:, 0] + 0.5 - u1) <= 1) \
        | (np.abs(px[:, 1] + 0.5 - v0) <= 1) | (np.abs(px[:, 1] + 0.5 - v1) <= 1)
    assert len(px) > 0 and near_side.all()
    assert img[30, 40] == 200 and img[0, 0] == 0


def test_equal_intensity_boundary_has_no_edges():
    left = Patch(2, 2.0, (-1.0, -1.0), (0.0, 1.0), 120.0)
    right = Patch(2, 2.0, (0.0, -1.0), (1.0, 1.0), 120.0)
    _, edges = render_edges(scene([left, right]), Pose.identity())
    assert len(edges) == 0
    _, edges = render_edges(scene([left, Patch(2, 2.0, (0.0, -1.0), (1.0, 1.0), 180.0)]), Pose.identity())
    assert set(edges.pixels[:, 0]) == {39}


def test_corridor_canny_recall(corridor):
    img, truth = render_edges(corridor, corridor.camera_poses[0])
    dist = build(canny(img)).cost
    hit = dist[truth.mask] <= 1.0
    assert len(truth) > 1000 and hit.mean() >= 0.9


def test_truth_pose_reprojects_corners_onto_edge_cells(corridor):
    pose, intr = corridor.camera_poses[0], corridor.intrinsics
    _, edges = render_edges(corridor, pose)
    corners = np.unique(np.concatenate([p.corners() for p in corridor.patches]), axis=0)
    pc = pose.apply(corners)
    front = pc[:, 2] > 0.1
    corners, pc = corners[front], pc[front]
    uv = np.column_stack([intr.fx * pc[:, 0] / pc[:, 2] + intr.u0, intr.fy * pc[:, 1] / pc[:, 2] + intr.v0])
    inside = (uv[:, 0] > 2) & (uv[:, 0] < intr.width - 3) & (uv[:, 1] > 2) & (uv[:, 1] < intr.height - 3)
    offs = corners - pose.center
    dist = np.linalg.norm(offs, axis=1)
    t, _ = first_hit(pose.center, offs / dist[:, None], corridor.patches)
    seen = inside & (t >= dist - 1e-6)
    assert seen.sum() >= 8
    # an edge cell covers the unit square between its four pixel centres
    cells = edges.pixels + 0.5
    for p in uv[seen]:
        gap = np.maximum(np.abs(cells - p) - 0.5, 0.0)
        assert np.min(np.hypot(gap[:, 0], gap[:, 1])) <= 0.5


def test_image_noise_is_seeded():
    spec = corridor_scene(2, intrinsics=SMALL, image_noise=2.0)
    a, _ = render_edges(spec, spec.camera_poses[0])
    b, _ = render_edges(spec, spec.camera_poses[0])
    clean, _ = render_edges(corridor_scene(2, intrinsics=SMALL), spec.camera_poses[0])
    assert np.array_equal(a, b) and 1.5 < np.std(a - clean) < 2.5


# -- perturbation -------------------------------------------------------------------------

def test_zero_perturbation_is_identity():
    pose = Pose.from_rotvec([0.1, -0.2, 0.3], [1, 2, 3])
    out = perturb(pose, 0.0, 0.0, 7)
    assert np.allclose(out.q, pose.q, atol=1e-15) and np.allclose(out.t, pose.t, atol=1e-15)


@given(st.floats(0, 20), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_perturbation_magnitudes_are_exact(rot, trans, seed):
    pose = Pose.from_rotvec([0.3, 0.1, -0.2], [0.5, -1.0, 2.0])
    out = perturb(pose, rot, trans, seed)
    assert abs(rotation_distance_deg(out, pose) - rot) <= 1e-9
    assert center_distance(out, pose) == pytest.approx(trans, abs=1e-12)


def test_perturbation_seeds():
    pose = Pose.identity()
    a, b, c = perturb(pose, 2, 0.05, 1), perturb(pose, 2, 0.05, 2), perturb(pose, 2, 0.05, 1)
    assert a.to_text() == c.to_text() and a.to_text() != b.to_text()
    assert rotation_distance_deg(a, pose) == pytest.approx(rotation_distance_deg(b, pose), abs=1e-9)


def test_outlier_injection():
    fs = FeatureSet(np.zeros((50, 3)), np.zeros(50, int))
    out = inject_outliers(fs, 0.2, [-1, -1, -1], [1, 1, 1], 4)
    moved = np.any(out.points != 0, axis=1)
    assert moved.sum() == 10 and np.all(np.abs(out.points) <= 1)
    assert inject_outliers(fs, 0.0, 0, 1, 4) is fs


# -- corridors and scene files ----------------------------------------------------------------

def test_corridor_is_seed_deterministic():
    a, b = corridor_scene(5, intrinsics=SMALL), corridor_scene(5, intrinsics=SMALL)
    assert scene_to_text(a) == scene_to_text(b)
    assert scene_to_text(a) != scene_to_text(corridor_scene(6, intrinsics=SMALL))
    ca, cb = make_case(a, 2.0, 0.05), make_case(b, 2.0, 0.05)
    assert ca.image.tobytes() == cb.image.tobytes()
    assert all(fa.points.tobytes() == fb.points.tobytes() for fa, fb in zip(ca.frames, cb.frames))
    assert ca.initial_pose.to_text() == cb.initial_pose.to_text()


def test_corridor_bounds_and_camera():
    spec = corridor_scene(1)
    lo, hi = scene_bounds(spec)
    assert np.allclose(lo, [-1.5, 0, 0]) and np.allclose(hi, [1.5, 14, 3])
    c = spec.camera_poses[0].center
    assert np.all((c > lo) & (c < hi))


def test_scene_text_round_trip():
    spec = corridor_scene(3, intrinsics=SMALL, range_noise=0.005, image_noise=2.0)
    text = scene_to_text(spec)
    back = scene_from_entries(parse_entries(text, "s.txt"), "s.txt")
    assert scene_to_text(back) == text
    assert back.patches == spec.patches and back.scans == spec.scans
    assert back.camera_poses[0].to_text() == spec.camera_poses[0].to_text()


def test_patch_and_scan_validation():
    with pytest.raises(ValueError):
        Patch(3, 0.0, (0, 0), (1, 1), 1.0)
    with pytest.raises(ValueError):
        Patch(0, 0.0, (0, 0), (0, 1), 1.0)
    with pytest.raises(ValueError):
        Scan("diagonal", (0, 0, 0))


def test_forward_camera_looks_down_y():
    pose = Pose.from_camera_center(FORWARD_Y, [0, 0, 0])
    assert np.allclose(pose.apply(np.array([[0, 1.0, 0]])), [[0, 0, 1]])
    assert np.allclose(pose.apply(np.array([[0, 1.0, 1.0]])), [[0, -1, 1]])
