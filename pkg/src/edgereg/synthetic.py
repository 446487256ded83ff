"""Ground-truth indoor scenes built from axis-aligned rectangles.

A scene is a set of flat-shaded rectangles, LiDAR scanner placements and a
camera.  From it we raycast ordered LiDAR frames, render a grayscale image
with its analytic edge cells, and perturb the true camera pose.

World axes: x across the corridor, y along it, z up.  The camera looks
down +y with image rows growing towards -z.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import CameraIntrinsics, Pose, quat_exp
from .imaging import EdgeMap
from .lidar_features import FeatureSet, LidarFrame

AXES = "xyz"
SCAN_PLANES = ("horizontal", "profile", "sagittal")

# world->camera rotation of a level camera looking down +y
FORWARD_Y = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class Patch:
    """Rectangle ``{p : p[axis] == offset}`` bounded on the two remaining axes."""

    axis: int
    offset: float
    lo: tuple[float, float]
    hi: tuple[float, float]
    intensity: float

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {self.axis}")
        if not (self.hi[0] > self.lo[0] and self.hi[1] > self.lo[1]):
            raise ValueError(f"degenerate patch bounds {self.lo} {self.hi}")

    @property
    def other_axes(self) -> tuple[int, int]:
        return tuple(a for a in range(3) if a != self.axis)

    def corners(self) -> np.ndarray:
        a, b = self.other_axes
        out = np.zeros((4, 3))
        out[:, self.axis] = self.offset
        for k, (u, v) in enumerate(((0, 0), (1, 0), (1, 1), (0, 1))):
            out[k, a] = (self.lo, self.hi)[u][0]
            out[k, b] = (self.lo, self.hi)[v][1]
        return out


@dataclass(frozen=True)
class Scan:
    plane: str
    origin: tuple[float, float, float]

    def __post_init__(self):
        if self.plane not in SCAN_PLANES:
            raise ValueError(f"scan plane must be one of {SCAN_PLANES}, got {self.plane!r}")

    def directions(self, resolution_deg: float) -> np.ndarray:
        angles = np.radians(np.arange(0.0, 360.0, resolution_deg))
        c, s = np.cos(angles), np.sin(angles)
        zero = np.zeros_like(c)
        if self.plane == "horizontal":
            return np.stack([c, s, zero], axis=1)
        if self.plane == "profile":
            return np.stack([c, zero, s], axis=1)
        return np.stack([zero, c, s], axis=1)


@dataclass(frozen=True)
class SceneSpec:
    patches: tuple[Patch, ...]
    intrinsics: CameraIntrinsics
    camera_poses: tuple[Pose, ...]
    scans: tuple[Scan, ...] = ()
    angular_resolution_deg: float = 0.1
    max_range: float = 30.0
    range_noise: float = 0.0
    image_noise: float = 0.0
    supersampling: int = 3
    background: float = 0.0
    seed: int = 0


@dataclass(frozen=True, eq=False)
class GroundTruthCase:
    spec: SceneSpec
    frames: list
    image: np.ndarray
    edges: EdgeMap
    true_pose: Pose
    initial_pose: Pose
    rotation_deg: float
    translation_m: float


def first_hit(origins: np.ndarray, dirs: np.ndarray, patches, max_range: float = np.inf):
    """Nearest patch hit per ray: ``(t, patch_index)``; misses give ``(inf, -1)``."""
    origins = np.broadcast_to(np.asarray(origins, dtype=np.float64), dirs.shape)
    best_t = np.full(len(dirs), np.inf)
    best_id = np.full(len(dirs), -1, dtype=np.int64)
    eps = 1e-9
    for k, patch in enumerate(patches):
        da = dirs[:, patch.axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (patch.offset - origins[:, patch.axis]) / da
        ok = (t > eps) & (t < best_t) & (t <= max_range)
        if not ok.any():
            continue
        for j, ax in enumerate(patch.other_axes):
            coord = origins[ok, ax] + t[ok] * dirs[ok, ax]
            inside = (coord >= patch.lo[j] - eps) & (coord <= patch.hi[j] + eps)
            ok[np.flatnonzero(ok)[~inside]] = False
        best_t[ok] = t[ok]
        best_id[ok] = k
    return best_t, best_id


def raycast_frames(spec: SceneSpec) -> list[LidarFrame]:
    """One ordered frame per scan; rays that miss every patch are omitted."""
    seeds = np.random.SeedSequence([spec.seed, 1]).spawn(max(len(spec.scans), 1))
    frames = []
    for i, scan in enumerate(spec.scans):
        dirs = scan.directions(spec.angular_resolution_deg)
        origin = np.asarray(scan.origin, dtype=np.float64)
        t, hit = first_hit(origin, dirs, spec.patches, spec.max_range)
        rng = np.random.default_rng(seeds[i])
        noise = rng.normal(0.0, spec.range_noise, len(dirs)) if spec.range_noise > 0 else 0.0
        t = t + noise
        keep = hit >= 0
        frames.append(LidarFrame(origin + t[keep, None] * dirs[keep], frame_id=i))
    return frames


def _camera_rays(pose: Pose, intr: CameraIntrinsics, offsets):
    rows, cols = np.mgrid[0 : intr.height, 0 : intr.width]
    du, dv = offsets
    d_cam = np.stack([(cols + du - intr.u0) / intr.fx, (rows + dv - intr.v0) / intr.fy, np.ones(rows.shape)], axis=-1)
    return d_cam.reshape(-1, 3) @ pose.rotation


def render_labels(spec: SceneSpec, pose: Pose, intr: CameraIntrinsics, offsets=(0.0, 0.0)) -> np.ndarray:
    """Index of the patch seen through each pixel (sampled at ``pixel + offsets``); -1 = background."""
    dirs = _camera_rays(pose, intr, offsets)
    _, ids = first_hit(pose.center, dirs, spec.patches)
    return ids.reshape(intr.height, intr.width)


def _intensity_lut(spec: SceneSpec) -> np.ndarray:
    return np.array([p.intensity for p in spec.patches] + [spec.background], dtype=np.float64)


def analytic_edges(labels: np.ndarray, lut: np.ndarray) -> EdgeMap:
    """Cells whose 2x2 block of pixel-centre samples has more than one intensity."""
    val = lut[labels]
    block = np.stack([val[:-1, :-1], val[:-1, 1:], val[1:, :-1], val[1:, 1:]])
    mask = np.zeros(labels.shape, dtype=bool)
    mask[:-1, :-1] = block.max(axis=0) != block.min(axis=0)
    return EdgeMap(mask)


def render_edges(spec: SceneSpec, pose: Pose, intr: CameraIntrinsics | None = None, rng=None):
    """Anti-aliased 8-bit-valued image and its analytic edge cells.

    Returns ``(image, edges)``; ``image`` holds integers in [0, 255] as float64.
    """
    intr = intr or spec.intrinsics
    lut = _intensity_lut(spec)
    labels = render_labels(spec, pose, intr)
    edges = analytic_edges(labels, lut)
    image = lut[labels]
    n = spec.supersampling
    if n > 1:
        # only pixels next to a label change can receive mixed coverage
        pad = np.pad(labels, 1, mode="edge")
        rows, cols = labels.shape
        mixed = np.zeros(labels.shape, dtype=bool)
        for dr in (0, 1, 2):
            for dc in (0, 1, 2):
                mixed |= pad[dr : dr + rows, dc : dc + cols] != labels
        where = np.flatnonzero(mixed.ravel())
        offs = (np.arange(n) + 0.5) / n - 0.5
        acc = np.zeros(len(where))
        for dv in offs:
            for du in offs:
                dirs = _camera_rays(pose, intr, (du, dv))[where]
                _, ids = first_hit(pose.center, dirs, spec.patches)
                acc += lut[ids]
        image = image.ravel().copy()
        image[where] = acc / (n * n)
        image = image.reshape(labels.shape)
    if spec.image_noise > 0:
        if rng is None:
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2]))
        image = image + rng.normal(0.0, spec.image_noise, image.shape)
    return np.clip(np.floor(image + 0.5), 0, 255), edges


def random_unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def perturb(pose: Pose, rot_deg: float, trans_m: float, seed) -> Pose:
    """Rotate about the camera centre by exactly ``rot_deg`` and move the centre by ``trans_m``."""
    rng = np.random.default_rng(seed)
    axis = random_unit(rng)
    direction = random_unit(rng)
    dq = quat_exp(axis * np.radians(rot_deg))
    rotated = Pose(dq, np.zeros(3)).compose(Pose(pose.q, np.zeros(3)))
    center = pose.center + direction * trans_m
    return Pose(rotated.q, -(rotated.rotation @ center))


def inject_outliers(features: FeatureSet, fraction: float, lo, hi, seed) -> FeatureSet:
    """Replace ``fraction`` of the features by points uniform in the box ``[lo, hi]``."""
    n = len(features)
    k = int(round(fraction * n))
    if k == 0:
        return features
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=k, replace=False)
    pts = features.points.copy()
    pts[idx] = rng.uniform(lo, hi, size=(k, 3))
    return FeatureSet(pts, features.frame_ids)


# -- corridor generator ---------------------------------------------------------

# Five gray levels 60 apart.  Surfaces that can meet in the image never share
# a level, so every visible crease clears the default Canny thresholds.
LEVELS = (10, 70, 130, 190, 250)
FLOOR, LEFT_WALL, END_WALL, RIGHT_WALL, CEILING = LEVELS
# (front, inner face) per side, (top, front, side) for boxes
PILASTER_SHADES = {-1.0: (190, 130), 1.0: (130, 70)}
BOX_SHADES = (250, 190, 130)
JITTER = 3


def _box(x0, x1, y0, y1, z0, z1, shade):
    """Patches of the five visible faces of an axis-aligned box resting on z0."""
    top, front, side = shade
    return [
        Patch(2, z1, (x0, y0), (x1, y1), top),
        Patch(1, y0, (x0, z0), (x1, z1), front),
        Patch(1, y1, (x0, z0), (x1, z1), front),
        Patch(0, x0, (y0, z0), (y1, z1), side),
        Patch(0, x1, (y0, z0), (y1, z1), side),
    ]


def corridor_scene(seed: int = 0, *, width: float = 3.0, length: float = 14.0, height: float = 3.0,
                   intrinsics: CameraIntrinsics | None = None, angular_resolution_deg: float = 0.05,
                   range_noise: float = 0.0, image_noise: float = 0.0, supersampling: int = 3,
                   scan_spacing: float = 0.05) -> SceneSpec:
    """Seeded corridor with wall pilasters, floor boxes and a camera near one end."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    intr = intrinsics or CameraIntrinsics(500.0, 500.0, 319.5, 239.5, 640, 480)
    hw = width / 2
    jitter = lambda: float(rng.integers(-JITTER, JITTER + 1))
    patches = [
        Patch(2, 0.0, (-hw, 0.0), (hw, length), FLOOR + jitter()),
        Patch(2, height, (-hw, 0.0), (hw, length), CEILING + jitter()),
        Patch(0, -hw, (0.0, 0.0), (length, height), LEFT_WALL + jitter()),
        Patch(0, hw, (0.0, 0.0), (length, height), RIGHT_WALL + jitter()),
        Patch(1, length, (-hw, 0.0), (hw, height), END_WALL + jitter()),
        Patch(1, 0.0, (-hw, 0.0), (hw, height), END_WALL + jitter()),
    ]
    # pilasters: two per wall, spaced so they never overlap
    for side in (-1.0, 1.0):
        for y0 in (rng.uniform(4.0, 6.5), rng.uniform(8.0, 11.0)):
            depth, w = rng.uniform(0.35, 0.45), rng.uniform(0.3, 0.5)
            wall = side * hw
            inner = wall - side * depth
            x0, x1 = sorted((wall, inner))
            front = PILASTER_SHADES[side][0] + jitter()
            patches += [
                Patch(1, y0, (x0, 0.0), (x1, height), front),
                Patch(1, y0 + w, (x0, 0.0), (x1, height), front),
                Patch(0, inner, (y0, 0.0), (y0 + w, height), PILASTER_SHADES[side][1] + jitter()),
            ]
    # boxes on the floor, clear of the centre line and the pilasters
    for y_lo, y_hi, side in ((3.5, 5.0, -1.0), (6.5, 8.0, 1.0), (9.0, 10.5, -1.0)):
        sx, sy, sz = rng.uniform(0.4, 0.55), rng.uniform(0.4, 0.8), rng.uniform(0.4, 1.0)
        y0 = rng.uniform(y_lo, y_hi)
        x_in = side * rng.uniform(0.4, 0.6)
        x0, x1 = sorted((x_in, x_in + side * sx))
        patches += _box(x0, x1, y0, y0 + sy, 0.0, sz, tuple(min(v + jitter(), 255.0) for v in BOX_SHADES))

    # a mapping pass: dense scans from the camera end, sparser ones further in
    near = 1.5
    step = scan_spacing
    scans = [Scan("profile", (0.0, float(y), 1.5)) for y in np.arange(near, length - 1.4, 5 * step)]
    scans += [Scan("horizontal", (0.0, near, float(z))) for z in np.arange(step, height - 0.02, step)]
    scans += [Scan("horizontal", (0.0, y, z)) for y in (7.0, length - 1.5) for z in (0.2, 0.5, 0.8, 1.2, 1.9, 2.5, 2.8)]
    scans += [Scan("sagittal", (float(x), near, 1.5)) for x in np.arange(-hw + step, hw - 0.02, step)]
    scans += [Scan("sagittal", (x, length / 2, 1.5)) for x in (-1.0, -0.6, -0.2, 0.2, 0.6, 1.0)]

    center = np.array([rng.uniform(-0.3, 0.3), rng.uniform(0.8, 1.3), rng.uniform(1.3, 1.7)])
    # the roll keeps image edges off the pixel axes
    pitch, yaw, roll = np.radians(rng.uniform(-5, 5, 3))
    r_world_to_cam = Pose(quat_exp([pitch, yaw, roll]), np.zeros(3)).rotation @ FORWARD_Y
    camera = Pose.from_camera_center(r_world_to_cam, center)
    return SceneSpec(tuple(patches), intr, (camera,), tuple(scans), angular_resolution_deg, 30.0,
                     range_noise, image_noise, supersampling, 0.0, seed)


def scene_bounds(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    corners = np.concatenate([p.corners() for p in spec.patches])
    return corners.min(axis=0), corners.max(axis=0)


def make_case(spec: SceneSpec, rot_deg: float, trans_m: float, perturb_seed=None) -> GroundTruthCase:
    true_pose = spec.camera_poses[0]
    image, edges = render_edges(spec, true_pose, spec.intrinsics)
    frames = raycast_frames(spec)
    seed = np.random.SeedSequence([spec.seed, 3]) if perturb_seed is None else perturb_seed
    init = perturb(true_pose, rot_deg, trans_m, seed)
    return GroundTruthCase(spec, frames, image, edges, true_pose, init, rot_deg, trans_m)


# -- scene spec files -------------------------------------------------------------

def scene_to_text(spec: SceneSpec) -> str:
    i = spec.intrinsics
    lines = [
        f"scene.seed = {spec.seed}",
        f"scene.angular_resolution_deg = {spec.angular_resolution_deg:.17g}",
        f"scene.max_range = {spec.max_range:.17g}",
        f"scene.range_noise = {spec.range_noise:.17g}",
        f"scene.image_noise = {spec.image_noise:.17g}",
        f"scene.supersampling = {spec.supersampling}",
        f"scene.background = {spec.background:.17g}",
        "camera.intrinsics = " + i.to_text().strip(),
    ]
    lines += [f"camera.pose.{k} = " + p.to_text().strip() for k, p in enumerate(spec.camera_poses)]
    for k, p in enumerate(spec.patches):
        lines.append(
            f"patch.{k} = {AXES[p.axis]} {p.offset:.17g} {p.lo[0]:.17g} {p.hi[0]:.17g} "
            f"{p.lo[1]:.17g} {p.hi[1]:.17g} {p.intensity:.17g}"
        )
    for k, s in enumerate(spec.scans):
        lines.append(f"scan.{k} = {s.plane} " + " ".join(f"{c:.17g}" for c in s.origin))
    return "\n".join(lines) + "\n"


def scene_from_entries(entries: dict, source="<scene>") -> SceneSpec:
    """Build a scene from parsed ``key -> (value, line)`` entries."""
    from .config import ConfigError, indexed, scalar

    def fetch(key, cast, default):
        return scalar(entries, key, cast, default, source)

    intr_entry = entries.get("camera.intrinsics")
    if intr_entry is None:
        raise ConfigError(source, None, "missing camera.intrinsics")
    try:
        intr = CameraIntrinsics.from_text(intr_entry[0], source)
    except ValueError as exc:
        raise ConfigError(source, intr_entry[1], str(exc)) from None
    poses = []
    for _, (value, line) in indexed(entries, "camera.pose"):
        poses.append(Pose.from_text(value, f"{source}:{line}"))
    if not poses:
        raise ConfigError(source, None, "missing camera.pose.0")
    patches = []
    for _, (value, line) in indexed(entries, "patch"):
        parts = value.split()
        if len(parts) != 7 or parts[0] not in AXES:
            raise ConfigError(source, line, "patch needs: axis(x|y|z) offset lo_a hi_a lo_b hi_b intensity")
        try:
            nums = [float(v) for v in parts[1:]]
            patches.append(Patch(AXES.index(parts[0]), nums[0], (nums[1], nums[3]), (nums[2], nums[4]), nums[5]))
        except ValueError as exc:
            raise ConfigError(source, line, str(exc)) from None
    scans = []
    for _, (value, line) in indexed(entries, "scan"):
        parts = value.split()
        try:
            scans.append(Scan(parts[0], tuple(float(v) for v in parts[1:4])))
            if len(parts) != 4:
                raise ValueError("scan needs: plane x y z")
        except (ValueError, IndexError) as exc:
            raise ConfigError(source, line, str(exc)) from None
    return SceneSpec(
        tuple(patches), intr, tuple(poses), tuple(scans),
        angular_resolution_deg=fetch("scene.angular_resolution_deg", float, 0.1),
        max_range=fetch("scene.max_range", float, 30.0),
        range_noise=fetch("scene.range_noise", float, 0.0),
        image_noise=fetch("scene.image_noise", float, 0.0),
        supersampling=fetch("scene.supersampling", int, 3),
        background=fetch("scene.background", float, 0.0),
        seed=fetch("scene.seed", int, 0),
    )
