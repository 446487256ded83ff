"""Corner features from ordered single-frame LiDAR scans.

Each scan is cut into chains at range discontinuities, every chain is split
recursively at the point farthest from its chord, adjacent collinear pieces
are merged back, and short pieces are dropped.  Points shared by two
consecutive kept segments are the corner features; the free ends of a chain
are never features.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import format_points, parse_points

GRID_SNAP = 0.01


@dataclass(frozen=True)
class SplitParams:
    max_point_line_distance: float = 0.03
    min_segment_points: int = 8
    min_segment_length: float = 0.2
    max_gap: float = 0.5

    def __post_init__(self):
        for name in ("max_point_line_distance", "min_segment_points", "min_segment_length", "max_gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class LidarFrame:
    points: np.ndarray
    frame_id: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"frame {self.frame_id} has non-finite points")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class FeatureSet:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    frame_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=np.float64).reshape(-1, 3))
        ids = np.asarray(self.frame_ids, dtype=np.int64).reshape(-1)
        if ids.size == 1 and len(self.points) != 1:
            ids = np.full(len(self.points), ids[0])
        if len(ids) != len(self.points):
            raise ValueError("one frame id per feature required")
        object.__setattr__(self, "frame_ids", ids)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Segment:
    """Inclusive index range ``[start, end]`` into the frame plus its TLS line."""

    start: int
    end: int
    centroid: np.ndarray
    direction: np.ndarray

    @property
    def count(self) -> int:
        return self.end - self.start + 1

    def distance(self, points: np.ndarray) -> np.ndarray:
        return _line_distance(points, self.centroid, self.direction)


def _line_distance(points, origin, direction):
    return np.linalg.norm(np.cross(np.atleast_2d(points) - origin, direction), axis=1)


def _chord_distance(pts: np.ndarray) -> np.ndarray:
    a, b = pts[0], pts[-1]
    chord = b - a
    n = np.linalg.norm(chord)
    if n < 1e-12:
        return np.linalg.norm(pts - a, axis=1)
    return _line_distance(pts, a, chord / n)


def fit_line(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Total-least-squares line: centroid and unit principal direction."""
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    d = vt[0]
    # orient along the scan so results are reproducible
    if np.dot(d, pts[-1] - pts[0]) < 0:
        d = -d
    return centroid, d


def split_chains(points: np.ndarray, max_gap: float) -> list[tuple[int, int]]:
    """Inclusive index ranges of runs without a consecutive jump above ``max_gap``."""
    if len(points) == 0:
        return []
    jumps = np.linalg.norm(np.diff(points, axis=0), axis=1) > max_gap
    starts = np.concatenate([[0], np.flatnonzero(jumps) + 1])
    ends = np.concatenate([np.flatnonzero(jumps), [len(points) - 1]])
    return list(zip(starts.tolist(), ends.tolist()))


def _split(points: np.ndarray, start: int, end: int, threshold: float) -> list[tuple[int, int]]:
    pieces = []
    stack = [(start, end)]
    while stack:
        s, e = stack.pop()
        if e - s < 2:
            pieces.append((s, e))
            continue
        d = _chord_distance(points[s : e + 1])
        m = int(np.argmax(d[1:-1])) + 1
        if d[m] > threshold:
            # right half pushed first so pieces come out in scan order
            stack.append((s + m, e))
            stack.append((s, s + m))
        else:
            pieces.append((s, e))
    return pieces


def _merge(points: np.ndarray, pieces: list[tuple[int, int]], threshold: float) -> list[tuple[int, int]]:
    merged = list(pieces)
    changed = True
    while changed and len(merged) > 1:
        changed = False
        for k in range(len(merged) - 1):
            s, e = merged[k][0], merged[k + 1][1]
            pts = points[s : e + 1]
            c, d = fit_line(pts)
            if _line_distance(pts, c, d).max() <= threshold:
                merged[k : k + 2] = [(s, e)]
                changed = True
                break
    return merged


def _segment_chains(frame: LidarFrame, p: SplitParams) -> list[list[Segment]]:
    pts = frame.points
    chains = []
    for s, e in split_chains(pts, p.max_gap):
        pieces = _merge(pts, _split(pts, s, e, p.max_point_line_distance), p.max_point_line_distance)
        kept = []
        for a, b in pieces:
            if b - a + 1 < p.min_segment_points:
                continue
            if np.linalg.norm(pts[b] - pts[a]) < p.min_segment_length:
                continue
            c, d = fit_line(pts[a : b + 1])
            kept.append(Segment(a, b, c, d))
        chains.append(kept)
    return chains


def split_into_segments(frame: LidarFrame, p: SplitParams | None = None) -> list[Segment]:
    p = p or SplitParams()
    return [seg for chain in _segment_chains(frame, p) for seg in chain]


def feature_indices(frame: LidarFrame, p: SplitParams | None = None) -> np.ndarray:
    """Frame indices of junctions between consecutive kept segments."""
    p = p or SplitParams()
    idx = []
    for chain in _segment_chains(frame, p):
        for a, b in zip(chain, chain[1:]):
            if a.end == b.start:
                idx.append(a.end)
    return np.array(idx, dtype=np.int64)


def extract_features(frame: LidarFrame, p: SplitParams | None = None) -> FeatureSet:
    idx = feature_indices(frame, p)
    return FeatureSet(frame.points[idx], np.full(len(idx), frame.frame_id, dtype=np.int64))


def _snap_keys(points: np.ndarray) -> np.ndarray:
    return np.floor(points / GRID_SNAP + 0.5).astype(np.int64)


def deduplicate(features: FeatureSet) -> FeatureSet:
    """One representative per 1 cm grid cell, independent of input order.

    The representative is the lexicographically smallest ``(x, y, z, frame_id)``
    in its cell; output is sorted by cell.
    """
    if len(features) == 0:
        return FeatureSet()
    pts, ids = features.points, features.frame_ids
    keys = _snap_keys(pts)
    order = np.lexsort((ids, pts[:, 2], pts[:, 1], pts[:, 0], keys[:, 2], keys[:, 1], keys[:, 0]))
    keys = keys[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(keys[1:] != keys[:-1], axis=1)
    sel = order[first]
    return FeatureSet(pts[sel], ids[sel])


def aggregate_features(frames, p: SplitParams | None = None) -> FeatureSet:
    sets = [extract_features(f, p) for f in frames]
    if not sets:
        return FeatureSet()
    return deduplicate(FeatureSet(np.concatenate([s.points for s in sets]), np.concatenate([s.frame_ids for s in sets])))


def read_frame(path, frame_id: int = 0) -> LidarFrame:
    path = Path(path)
    return LidarFrame(parse_points(path.read_text(), path), frame_id)


def frame_to_text(frame: LidarFrame) -> str:
    return format_points(frame.points)


def features_to_text(features: FeatureSet) -> str:
    return format_points(features.points, features.frame_ids)


def read_features(path) -> FeatureSet:
    path = Path(path)
    rows = parse_points(path.read_text(), path, columns=4)
    return FeatureSet(rows[:, :3], rows[:, 3].astype(np.int64))
