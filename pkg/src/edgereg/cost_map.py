"""Truncated Euclidean distance field over an edge map.

The distance transform is the exact two-pass lower-envelope algorithm of
Felzenszwalb and Huttenlocher: a 1-D squared-distance transform along every
column, then along every row of the result.  Distances are clamped at the
truncation radius, so saturated regions have exactly zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBounds
from .imaging import EdgeMap

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-python fallback is just slower
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

DEFAULT_TRUNCATION = 50.0


@njit(cache=True)
def _lower_envelope_1d(f, out, v, z):
    """Squared distance transform of the sampled function ``f`` (inf = no site)."""
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == np.inf:
            continue
        while k >= 0:
            p = v[k]
            s = ((fq + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
            if s <= z[k]:
                k -= 1
            else:
                break
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
        else:
            k += 1
            v[k] = q
            z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            out[q] = np.inf
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = d * d + f[v[k]]


@njit(cache=True)
def _squared_edt(sites):
    rows, cols = sites.shape
    n = max(rows, cols)
    v = np.zeros(n, dtype=np.int64)
    z = np.zeros(n + 1)
    buf = np.zeros(n)
    col_pass = np.empty((rows, cols))
    f = np.empty(rows)
    for c in range(cols):
        for r in range(rows):
            f[r] = 0.0 if sites[r, c] else np.inf
        _lower_envelope_1d(f, buf[:rows], v, z)
        for r in range(rows):
            col_pass[r, c] = buf[r]
    out = np.empty((rows, cols))
    for r in range(rows):
        _lower_envelope_1d(col_pass[r], buf[:cols], v, z)
        for c in range(cols):
            out[r, c] = buf[c]
    return out


def squared_distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest True cell (inf if none)."""
    return _squared_edt(np.ascontiguousarray(mask, dtype=np.bool_))


@dataclass(frozen=True, eq=False)
class CostMap:
    cost: np.ndarray
    truncation: float = DEFAULT_TRUNCATION

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    def contains(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(uv)
        u, v = uv[:, 0], uv[:, 1]
        return (u >= 0) & (u <= self.width - 1) & (v >= 0) & (v <= self.height - 1)

    def _cells(self, uv):
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        if not np.all(self.contains(uv)):
            bad = uv[~self.contains(uv)][0]
            raise OutOfBounds(f"sample point {tuple(bad)} outside [0, {self.width - 1}] x [0, {self.height - 1}]")
        u0 = np.minimum(np.floor(uv[:, 0]).astype(np.int64), max(self.width - 2, 0))
        v0 = np.minimum(np.floor(uv[:, 1]).astype(np.int64), max(self.height - 2, 0))
        u1 = np.minimum(u0 + 1, self.width - 1)
        v1 = np.minimum(v0 + 1, self.height - 1)
        a = uv[:, 0] - u0
        b = uv[:, 1] - v0
        c = self.cost
        return a, b, c[v0, u0], c[v0, u1], c[v1, u0], c[v1, u1]

    def sample_many(self, uv) -> np.ndarray:
        a, b, c00, c10, c01, c11 = self._cells(uv)
        return (1 - b) * ((1 - a) * c00 + a * c10) + b * ((1 - a) * c01 + a * c11)

    def gradient_many(self, uv) -> np.ndarray:
        """(N, 2) derivative ``(d/du, d/dv)`` of the bilinear surface."""
        a, b, c00, c10, c01, c11 = self._cells(uv)
        du = (1 - b) * (c10 - c00) + b * (c11 - c01)
        dv = (1 - a) * (c01 - c00) + a * (c11 - c10)
        return np.stack([du, dv], axis=1)

    def to_pgm_array(self) -> np.ndarray:
        """Cost mapped linearly from [0, truncation] to [0, 255]."""
        return np.floor(np.clip(self.cost / self.truncation, 0, 1) * 255 + 0.5).astype(np.uint8)


def build(edges: EdgeMap, truncation: float = DEFAULT_TRUNCATION) -> CostMap:
    if not truncation > 0:
        raise ValueError(f"truncation must be positive, got {truncation}")
    if edges.width < 1 or edges.height < 1:
        raise ValueError("edge map has degenerate dimensions")
    dist = np.sqrt(squared_distance_transform(edges.mask))
    return CostMap(np.minimum(dist, float(truncation)), float(truncation))


def sample(cmap: CostMap, p) -> float:
    """Bilinear cost at pixel ``(u, v)``; raises :class:`OutOfBounds` outside the grid."""
    return float(cmap.sample_many(np.asarray(p, dtype=np.float64).reshape(1, 2))[0])


def sample_gradient(cmap: CostMap, p) -> np.ndarray:
    return cmap.gradient_many(np.asarray(p, dtype=np.float64).reshape(1, 2))[0]
