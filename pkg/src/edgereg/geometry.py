"""Rigid poses, pinhole intrinsics and the world -> camera -> pixel chain.

Quaternions are stored as ``[w, x, y, z]``.  A :class:`Pose` maps world
points into the camera frame, ``p_cam = R @ p_world + t``.

Optimizer increments are 6-vectors ``(omega, dt)``.  The rotation part is
applied on the left, ``R <- Exp(omega) @ R``, and the translation part is
added directly, ``t <- t + dt``.  Both act in the camera frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BehindCamera, ParseError

MIN_DEPTH = 1e-6


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"cannot normalize quaternion {q}")
    # already unit up to rounding: leave the bits alone so text round trips are exact
    if abs(n - 1.0) > 4 * np.finfo(float).eps:
        q = q / n
    # canonical hemisphere keeps file output stable
    if q[0] < 0:
        q = -q
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    tr = np.trace(m)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return quat_normalize(np.array(q))


def quat_exp(rotvec: np.ndarray) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis * angle, radians)."""
    rotvec = np.asarray(rotvec, dtype=np.float64)
    theta = np.linalg.norm(rotvec)
    half = 0.5 * theta
    if theta < 1e-12:
        # second-order series; exact to machine precision at this size
        return quat_normalize(np.concatenate([[1.0], 0.5 * rotvec]))
    return np.concatenate([[np.cos(half)], np.sin(half) * rotvec / theta])


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle in radians of a unit quaternion, in [0, pi]."""
    return 2.0 * np.arctan2(np.linalg.norm(q[1:]), abs(q[0]))


def skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """World-to-camera rigid transform."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("pose translation must be finite")
        object.__setattr__(self, "q", quat_normalize(np.asarray(self.q).reshape(4)))
        object.__setattr__(self, "t", t)
        self.q.setflags(write=False)
        self.t.setflags(write=False)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @classmethod
    def from_rotvec(cls, rotvec, t) -> Pose:
        return cls(quat_exp(rotvec), t)

    @classmethod
    def from_matrix(cls, rotation, t) -> Pose:
        return cls(quat_from_matrix(rotation), t)

    @classmethod
    def from_camera_center(cls, rotation, center) -> Pose:
        """Pose whose camera sits at ``center`` (world) with world->camera ``rotation``."""
        rotation = np.asarray(rotation, dtype=np.float64)
        return cls(quat_from_matrix(rotation), -rotation @ np.asarray(center, dtype=np.float64))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.t

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.t

    def compose(self, other: Pose) -> Pose:
        """``self`` after ``other``: x -> self(other(x))."""
        return Pose(quat_multiply(self.q, other.q), self.rotation @ other.t + self.t)

    def inverse(self) -> Pose:
        qi = quat_conjugate(self.q)
        return Pose(qi, -(quat_to_matrix(qi) @ self.t))

    def retract(self, delta: np.ndarray) -> Pose:
        """Apply a tangent increment ``(omega, dt)``; the result is renormalized."""
        delta = np.asarray(delta, dtype=np.float64)
        return Pose(quat_multiply(quat_exp(delta[:3]), self.q), self.t + delta[3:])

    def to_text(self) -> str:
        return " ".join(f"{v:.17g}" for v in (*self.q, *self.t)) + "\n"

    @classmethod
    def from_text(cls, text: str, source="<pose>") -> Pose:
        lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1) if ln.strip() and not ln.lstrip().startswith("#")]
        if len(lines) != 1:
            raise ParseError(source, None, f"expected one pose line, found {len(lines)}")
        lineno, line = lines[0]
        vals = _floats(line, 7, source, lineno, "qw qx qy qz tx ty tz")
        try:
            return cls(vals[:4], vals[4:])
        except ValueError as exc:
            raise ParseError(source, lineno, str(exc)) from None

    def __repr__(self):
        return f"Pose(q={np.array2string(self.q, precision=6)}, t={np.array2string(self.t, precision=6)})"


def rotation_distance_deg(a: Pose, b: Pose) -> float:
    """Geodesic angle between the two rotations, degrees."""
    return float(np.degrees(quat_angle(quat_multiply(a.q, quat_conjugate(b.q)))))


def center_distance(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.center - b.center))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    u0: float
    v0: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if int(self.width) != self.width or int(self.height) != self.height or self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be positive integers, got {self.width}x{self.height}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if not (0 <= self.u0 < self.width and 0 <= self.v0 < self.height):
            raise ValueError(f"principal point ({self.u0}, {self.v0}) outside {self.width}x{self.height} image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.u0], [0.0, self.fy, self.v0], [0.0, 0.0, 1.0]])

    def to_text(self) -> str:
        return f"{self.fx:.17g} {self.fy:.17g} {self.u0:.17g} {self.v0:.17g} {self.width:d} {self.height:d}\n"

    @classmethod
    def from_text(cls, text: str, source="<intrinsics>") -> CameraIntrinsics:
        lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1) if ln.strip() and not ln.lstrip().startswith("#")]
        if len(lines) != 1:
            raise ParseError(source, None, f"expected one intrinsics line, found {len(lines)}")
        lineno, line = lines[0]
        fx, fy, u0, v0, w, h = _floats(line, 6, source, lineno, "fx fy u0 v0 width height")
        if w != int(w) or h != int(h):
            raise ParseError(source, lineno, "width and height must be integers")
        try:
            return cls(fx, fy, u0, v0, int(w), int(h))
        except ValueError as exc:
            raise ParseError(source, lineno, str(exc)) from None


def _floats(line, n, source, lineno, layout):
    parts = line.split()
    if len(parts) != n:
        raise ParseError(source, lineno, f"expected {n} values ({layout}), got {len(parts)}")
    try:
        vals = np.array([float(p) for p in parts])
    except ValueError:
        raise ParseError(source, lineno, f"non-numeric value in {line.strip()!r}") from None
    if not np.all(np.isfinite(vals)):
        raise ParseError(source, lineno, "values must be finite")
    return vals


def read_pose(path) -> Pose:
    path = Path(path)
    return Pose.from_text(path.read_text(), path)


def read_intrinsics(path) -> CameraIntrinsics:
    path = Path(path)
    return CameraIntrinsics.from_text(path.read_text(), path)


def transform_to_camera(pose: Pose, p_world: np.ndarray) -> np.ndarray:
    """``R @ p + t`` for a single point or an (N, 3) array."""
    return pose.apply(p_world)


def project(intr: CameraIntrinsics, p_cam) -> tuple[np.ndarray, float]:
    """Pixel ``(u, v)`` and depth of one camera-frame point.

    Raises :class:`BehindCamera` when the depth is at most ``MIN_DEPTH``.
    """
    x, y, z = np.asarray(p_cam, dtype=np.float64)
    if not z > MIN_DEPTH:
        raise BehindCamera(f"point depth {z} <= {MIN_DEPTH}")
    return np.array([intr.fx * x / z + intr.u0, intr.fy * y / z + intr.v0]), float(z)


def project_points(intr: CameraIntrinsics, p_cam: np.ndarray):
    """Vectorized :func:`project`.

    Returns ``(uv, depth, in_front)``; rows with ``in_front == False`` hold NaN pixels.
    """
    p_cam = np.atleast_2d(np.asarray(p_cam, dtype=np.float64))
    z = p_cam[:, 2]
    in_front = z > MIN_DEPTH
    uv = np.full((len(p_cam), 2), np.nan)
    zf = z[in_front]
    uv[in_front, 0] = intr.fx * p_cam[in_front, 0] / zf + intr.u0
    uv[in_front, 1] = intr.fy * p_cam[in_front, 1] / zf + intr.v0
    return uv, z, in_front


def project_jacobians(intr: CameraIntrinsics, pose: Pose, p_world: np.ndarray) -> np.ndarray:
    """(N, 2, 6) derivatives of the pixel w.r.t. the tangent increment ``(omega, dt)``.

    Rows for points behind the camera are NaN.
    """
    p_world = np.atleast_2d(np.asarray(p_world, dtype=np.float64))
    rp = p_world @ pose.rotation.T
    pc = rp + pose.t
    x, y, z = pc.T
    with np.errstate(divide="ignore", invalid="ignore"):
        iz = np.where(z > MIN_DEPTH, 1.0 / z, np.nan)
    n = len(p_world)
    d_uv_d_pc = np.zeros((n, 2, 3))
    d_uv_d_pc[:, 0, 0] = intr.fx * iz
    d_uv_d_pc[:, 0, 2] = -intr.fx * x * iz * iz
    d_uv_d_pc[:, 1, 1] = intr.fy * iz
    d_uv_d_pc[:, 1, 2] = -intr.fy * y * iz * iz
    # d(Exp(w) R p)/dw at w=0 is -[R p]_x
    d_pc = np.zeros((n, 3, 6))
    d_pc[:, 0, 1], d_pc[:, 0, 2] = rp[:, 2], -rp[:, 1]
    d_pc[:, 1, 0], d_pc[:, 1, 2] = -rp[:, 2], rp[:, 0]
    d_pc[:, 2, 0], d_pc[:, 2, 1] = rp[:, 1], -rp[:, 0]
    d_pc[:, :, 3:] = np.eye(3)
    return d_uv_d_pc @ d_pc


def project_jacobian(intr: CameraIntrinsics, pose: Pose, p_world) -> np.ndarray:
    """2x6 Jacobian of :func:`project` composed with :func:`transform_to_camera`."""
    p_cam = transform_to_camera(pose, np.asarray(p_world, dtype=np.float64))
    if not p_cam[2] > MIN_DEPTH:
        raise BehindCamera(f"point depth {p_cam[2]} <= {MIN_DEPTH}")
    return project_jacobians(intr, pose, p_world)[0]
