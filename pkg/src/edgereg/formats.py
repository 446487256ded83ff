"""Binary PNM images, ASCII point files and atomic file output."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("ascii"))


# -- PNM ---------------------------------------------------------------------

def _pnm_header_tokens(data: bytes, path, count: int):
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError(path, None, "truncated PNM header")
        tokens.append(data[start:pos].decode("ascii", errors="replace"))
    # exactly one whitespace byte separates header and raster
    return tokens, pos + 1


def decode_pnm(data: bytes, path="<pnm>") -> np.ndarray:
    """Decode a P5 or P6 image into an (H, W) or (H, W, 3) integer array."""
    if data[:2] not in (b"P5", b"P6"):
        raise ParseError(path, 1, f"unsupported PNM magic {data[:2]!r}; need P5 or P6")
    tokens, offset = _pnm_header_tokens(data, path, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError(path, 1, f"bad PNM header values {tokens[1:]}") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ParseError(path, 1, f"bad PNM header values {tokens[1:]}")
    channels = 3 if tokens[0] == "P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height * channels
    raster = np.frombuffer(data, dtype=dtype, count=-1, offset=offset)
    if raster.size < n:
        raise ParseError(path, None, f"raster has {raster.size} samples, header promises {n}")
    raster = raster[:n].astype(np.uint16 if maxval > 255 else np.uint8)
    return raster.reshape((height, width, 3) if channels == 3 else (height, width))


def read_pnm(path) -> np.ndarray:
    path = Path(path)
    return decode_pnm(path.read_bytes(), path)


def encode_pnm(image: np.ndarray, maxval: int = 255) -> bytes:
    image = np.asarray(image)
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode array of shape {image.shape} as PNM")
    h, w = image.shape[:2]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raster = np.clip(image, 0, maxval).astype(dtype)
    return magic + f"\n{w} {h}\n{maxval}\n".encode("ascii") + raster.tobytes()


def write_pnm(path, image: np.ndarray, maxval: int = 255) -> None:
    atomic_write_bytes(path, encode_pnm(image, maxval))


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma ``0.299 R + 0.587 G + 0.114 B`` rounded to the nearest integer."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.floor(rgb @ np.array([0.299, 0.587, 0.114]) + 0.5)


def read_gray(path) -> np.ndarray:
    """Any P5/P6 file as a float64 intensity grid."""
    img = read_pnm(path)
    if img.ndim == 3:
        return rgb_to_gray(img)
    return img.astype(np.float64)


def read_rgb(path) -> np.ndarray:
    img = read_pnm(path)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return img


# -- ASCII point files ---------------------------------------------------------

def parse_points(text: str, path="<points>", columns: int = 3) -> np.ndarray:
    """Parse whitespace-separated rows of ``columns`` numbers; blank and # lines skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != columns:
            raise ParseError(path, lineno, f"expected {columns} columns, got {len(parts)}")
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise ParseError(path, lineno, f"non-numeric value in {line!r}") from None
        if not all(np.isfinite(row)):
            raise ParseError(path, lineno, "non-finite coordinate")
        rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(-1, columns)


def format_points(points: np.ndarray, extra: np.ndarray | None = None) -> str:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lines = []
    for i, p in enumerate(points):
        line = f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}"
        if extra is not None:
            line += f" {int(extra[i])}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")
