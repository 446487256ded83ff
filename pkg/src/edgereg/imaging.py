"""Canny edge detection built from the 2x2 finite-difference stencil.

Images are float64 arrays indexed ``[row, col]``.  Gradient cell ``(i, j)``
is computed from pixels ``(i..i+1, j..j+1)``; its centre therefore sits at
pixel coordinates ``(u, v) = (j + 0.5, i + 0.5)``.  Edge maps report cell
indices, so consumers that need sub-pixel positions add that half pixel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ImageTooSmall, InvalidAperture

DIRECTION_OFFSET = -0.75 * np.pi

# Neighbour step (drow, dcol) for each direction bin of the offset angle.
# Bin b of the offset angle is bin (b + 3) % 4 of the plain atan(Iy/Ix) angle,
# and Iy points up the image (towards row 0).
_BIN_STEPS = np.array([(-1, -1), (0, 1), (-1, 1), (-1, 0)])


@dataclass(frozen=True)
class CannyParams:
    low_threshold: float = 50.0
    ratio: float = 3.0
    aperture: int = 3

    def __post_init__(self):
        if not self.low_threshold >= 0:
            raise ValueError(f"low_threshold must be non-negative, got {self.low_threshold}")
        if not 2.0 <= self.ratio <= 3.0:
            raise ValueError(f"ratio must lie in [2, 3], got {self.ratio}")
        check_aperture(self.aperture)

    @property
    def high_threshold(self) -> float:
        return self.ratio * self.low_threshold


@dataclass(frozen=True, eq=False)
class GradientField:
    """Per-cell derivatives; ``direction`` is the offset angle reduced to [0, pi)."""

    ix: np.ndarray
    iy: np.ndarray
    magnitude: np.ndarray
    direction: np.ndarray
    valid: np.ndarray

    @property
    def shape(self):
        return self.magnitude.shape

    def with_magnitude(self, magnitude: np.ndarray, valid: np.ndarray | None = None) -> GradientField:
        return GradientField(self.ix, self.iy, magnitude, self.direction, self.valid if valid is None else valid)

    def direction_bins(self) -> np.ndarray:
        return np.rint(self.direction / (np.pi / 4)).astype(np.int64) % 4


@dataclass(frozen=True, eq=False)
class EdgeMap:
    mask: np.ndarray

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def pixels(self) -> np.ndarray:
        """(N, 2) integer ``(u, v)`` coordinates in row-major order."""
        return np.argwhere(self.mask)[:, ::-1]

    def __len__(self):
        return int(self.mask.sum())

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels) -> EdgeMap:
        mask = np.zeros((height, width), dtype=bool)
        pixels = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
        if len(pixels):
            if pixels.min() < 0 or pixels[:, 0].max() >= width or pixels[:, 1].max() >= height:
                raise ValueError("edge pixel outside the image")
            mask[pixels[:, 1], pixels[:, 0]] = True
        return cls(mask)


def check_aperture(aperture) -> int:
    if aperture not in (3, 5, 7):
        raise InvalidAperture(f"aperture must be one of 3, 5, 7; got {aperture!r}")
    return int(aperture)


def gaussian_sigma(aperture: int) -> float:
    return 0.3 * ((aperture - 1) / 2 - 1) + 0.8


def gaussian_kernel(aperture: int) -> np.ndarray:
    aperture = check_aperture(aperture)
    x = np.arange(aperture) - aperture // 2
    k = np.exp(-(x * x) / (2.0 * gaussian_sigma(aperture) ** 2))
    return k / k.sum()


def sobel_step_response(aperture: int) -> float:
    """Peak response of the Sobel x-derivative of this aperture to a unit step (4, 48, 640)."""
    aperture = check_aperture(aperture)
    return float(2 ** (aperture - 1) * comb(aperture - 1, (aperture - 1) // 2) // 2)


def derivative_gain(aperture: int) -> float:
    """Factor mapping stencil magnitudes onto the Sobel scale of the same aperture.

    A unit step seen through the Gaussian blur and the 2x2 stencil peaks at
    the kernel's central tap.  Multiplying by ``sobel / central_tap`` makes a
    step of contrast ``c`` report the magnitude a Sobel operator would,
    which is the scale the conventional Canny thresholds are chosen on.
    """
    return sobel_step_response(aperture) / gaussian_kernel(aperture)[aperture // 2]


def gaussian_smooth(img: np.ndarray, aperture: int = 3) -> np.ndarray:
    """Separable Gaussian blur with replicated borders."""
    kernel = gaussian_kernel(aperture)
    img = np.asarray(img, dtype=np.float64)
    h = len(kernel) // 2
    padded = np.pad(img, h, mode="edge")
    rows, cols = img.shape
    tmp = sum(w * padded[:, k : k + cols] for k, w in enumerate(kernel))
    return sum(w * tmp[k : k + rows, :] for k, w in enumerate(kernel))


def gradients(img: np.ndarray) -> GradientField:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 2 or img.shape[1] < 2:
        raise ImageTooSmall(f"need at least a 2x2 image, got shape {img.shape}")
    a = img[:-1, :-1]   # I(i, j)
    b = img[:-1, 1:]    # I(i, j+1)
    c = img[1:, :-1]    # I(i+1, j)
    d = img[1:, 1:]     # I(i+1, j+1)
    ix = np.zeros_like(img)
    iy = np.zeros_like(img)
    ix[:-1, :-1] = (b - a + d - c) / 2
    iy[:-1, :-1] = (b - d + a - c) / 2
    magnitude = np.sqrt(ix * ix + iy * iy)
    # atan2 agrees with atan(Iy/Ix) modulo pi and is defined for Ix == 0
    direction = np.mod(np.arctan2(iy, ix) + DIRECTION_OFFSET, np.pi)
    valid = np.zeros(img.shape, dtype=bool)
    valid[:-1, :-1] = True
    return GradientField(ix, iy, magnitude, direction, valid)


def neighbour_steps(g: GradientField) -> np.ndarray:
    """(H, W, 2) step ``(drow, dcol)`` towards the positive gradient neighbour."""
    return _BIN_STEPS[g.direction_bins()]


def non_max_suppress(g: GradientField) -> GradientField:
    """Zero every cell that is not a maximum along its quantized direction.

    A cell survives when its magnitude is strictly greater than the neighbour
    in the positive direction and at least the one in the negative direction,
    so plateaus thin to a single cell.  Cells whose neighbours are invalid
    are dropped and marked invalid.
    """
    m = g.magnitude
    rows, cols = m.shape
    steps = neighbour_steps(g)
    r, c = np.indices(m.shape)
    rp, cp = r + steps[..., 0], c + steps[..., 1]
    rn, cn = r - steps[..., 0], c - steps[..., 1]
    inside = (rp >= 0) & (rp < rows) & (cp >= 0) & (cp < cols) & (rn >= 0) & (rn < rows) & (cn >= 0) & (cn < cols)
    rp, cp, rn, cn = (np.clip(a, 0, lim - 1) for a, lim in ((rp, rows), (cp, cols), (rn, rows), (cn, cols)))
    valid = g.valid & inside & g.valid[rp, cp] & g.valid[rn, cn]
    keep = valid & (m > m[rp, cp]) & (m >= m[rn, cn])
    return g.with_magnitude(np.where(keep, m, 0.0), valid)


def hysteresis(g: GradientField, p: CannyParams) -> EdgeMap:
    """Keep above-low cells 8-connected (through above-low cells) to an above-high cell."""
    m = np.where(g.valid, g.magnitude, 0.0)
    candidate = m > p.low_threshold
    rows, cols = m.shape
    edges = np.zeros(m.shape, dtype=bool)
    seeds = np.argwhere(candidate & (m > p.high_threshold))
    edges[seeds[:, 0], seeds[:, 1]] = True
    queue = deque(map(tuple, seeds))
    while queue:
        i, j = queue.popleft()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ni, nj = i + di, j + dj
                if 0 <= ni < rows and 0 <= nj < cols and candidate[ni, nj] and not edges[ni, nj]:
                    edges[ni, nj] = True
                    queue.append((ni, nj))
    return EdgeMap(edges)


@dataclass(frozen=True, eq=False)
class CannyStages:
    smoothed: np.ndarray
    gradient: GradientField
    suppressed: GradientField
    edges: EdgeMap
    low_threshold: float

    @property
    def candidates(self) -> np.ndarray:
        """Cells surviving suppression whose magnitude exceeds the low threshold."""
        return self.suppressed.valid & (self.suppressed.magnitude > self.low_threshold)


def canny_stages(img: np.ndarray, p: CannyParams | None = None) -> CannyStages:
    p = p or CannyParams()
    img = np.asarray(img, dtype=np.float64)
    smoothed = gaussian_smooth(img, p.aperture)
    g = gradients(smoothed)
    # cells touching replicated-border rows/columns of the blur are never edges
    h = p.aperture // 2
    valid = g.valid.copy()
    valid[:h, :] = valid[:, :h] = False
    valid[max(img.shape[0] - 1 - h, 0) :, :] = False
    valid[:, max(img.shape[1] - 1 - h, 0) :] = False
    g = g.with_magnitude(g.magnitude * derivative_gain(p.aperture), valid)
    suppressed = non_max_suppress(g)
    return CannyStages(smoothed, g, suppressed, hysteresis(suppressed, p), p.low_threshold)


def canny(img: np.ndarray, p: CannyParams | None = None) -> EdgeMap:
    return canny_stages(img, p).edges
