"""Grayscale image container, PGM I/O, noise synthesis and bilinear sampling.

Images live on the unit square: pixel (i, j) of an h x w grid has its
center at ((j + 0.5) / w, (i + 0.5) / h), intensities in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class PgmParseError(ValueError):
    """Malformed PGM input; carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ImageGrid:
    """Rectangular grayscale intensity field with values in [0, 1]."""

    width: int
    height: int
    values: np.ndarray  # shape (height, width), float64

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.height, self.width):
            raise ValueError(
                f"values shape {v.shape} does not match "
                f"{(self.height, self.width)}"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @staticmethod
    def from_array(arr: np.ndarray) -> "ImageGrid":
        arr = np.asarray(arr, dtype=np.float64)
        h, w = arr.shape
        return ImageGrid(width=w, height=h, values=arr)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Return the next whitespace-delimited token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise PgmParseError("unexpected end of header", pos)
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def load_pgm(path) -> ImageGrid:
    """Load a binary (P5) or ASCII (P2) PGM file, scaling to [0, 1]."""
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic not in (b"P2", b"P5"):
        raise PgmParseError(f"unsupported magic number {magic!r}", 0)

    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise PgmParseError(f"malformed {name} field {tok!r}", pos) from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmParseError("non-positive image dimensions", pos)
    if not 0 < maxval <= 65535:
        raise PgmParseError(f"maxval {maxval} out of range", pos)

    n = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        bytes_per = 2 if maxval > 255 else 1
        payload = data[pos : pos + n * bytes_per]
        if len(payload) < n * bytes_per:
            raise PgmParseError("truncated raster payload", len(data))
        dtype = ">u2" if bytes_per == 2 else np.uint8
        raw = np.frombuffer(payload, dtype=dtype, count=n).astype(np.float64)
    else:
        raw = np.empty(n)
        for i in range(n):
            tok, pos = _next_token(data, pos)
            try:
                raw[i] = int(tok)
            except ValueError:
                raise PgmParseError(f"malformed sample {tok!r}", pos) from None

    vals = np.clip(raw / maxval, 0.0, 1.0).reshape(height, width)
    return ImageGrid(width=width, height=height, values=vals)


def save_pgm(grid: ImageGrid, path) -> None:
    """Write a binary P5 PGM with maxval 255."""
    quant = np.round(255.0 * np.clip(grid.values, 0.0, 1.0)).astype(np.uint8)
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + quant.tobytes())
    except OSError as exc:
        raise OSError(f"failed to write PGM to {path}: {exc}") from exc


def _polar_normals(n: int, seed: int) -> np.ndarray:
    """n standard normals via polar Box-Muller over a seeded PCG64 stream.

    The generator family and the rejection scheme are pinned so noisy
    fixtures reproduce bit-identically across runs and platforms.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty(n + 1)
    filled = 0
    while filled < n:
        m = max(1024, (n - filled) // 2 + 16)
        u = 2.0 * rng.random(m) - 1.0
        v = 2.0 * rng.random(m) - 1.0
        r2 = u * u + v * v
        keep = (r2 > 0.0) & (r2 < 1.0)
        u, v, r2 = u[keep], v[keep], r2[keep]
        scale = np.sqrt(-2.0 * np.log(r2) / r2)
        pair = np.empty(2 * len(r2))
        pair[0::2] = u * scale
        pair[1::2] = v * scale
        take = min(len(pair), n + 1 - filled)
        out[filled : filled + take] = pair[:take]
        filled += take
    return out[:n]


def add_gaussian_noise(grid: ImageGrid, sigma: float, seed: int) -> ImageGrid:
    """Add iid N(0, sigma^2) to every pixel, clamped to [0, 1]."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return grid
    noise = _polar_normals(grid.width * grid.height, seed)
    noisy = grid.values + sigma * noise.reshape(grid.height, grid.width)
    return ImageGrid.from_array(np.clip(noisy, 0.0, 1.0))


def sample_bilinear(grid: ImageGrid, points) -> np.ndarray:
    """Bilinear interpolation at points in [0,1]^2 (clamp-to-edge borders).

    points has shape (..., 2) with (x1, x2) = (column axis, row axis);
    returns an array of the leading shape. Scalar pair input gives a scalar.
    """
    pts = np.asarray(points, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    # continuous pixel-center coordinates, clamped to the center lattice
    cx = np.clip(pts[..., 0] * grid.width - 0.5, 0.0, grid.width - 1.0)
    cy = np.clip(pts[..., 1] * grid.height - 0.5, 0.0, grid.height - 1.0)
    j0 = np.clip(np.floor(cx).astype(np.intp), 0, grid.width - 1)
    i0 = np.clip(np.floor(cy).astype(np.intp), 0, grid.height - 1)
    j1 = np.minimum(j0 + 1, grid.width - 1)
    i1 = np.minimum(i0 + 1, grid.height - 1)
    fx = cx - j0
    fy = cy - i0
    v = grid.values
    top = (1 - fx) * v[i0, j0] + fx * v[i0, j1]
    bot = (1 - fx) * v[i1, j0] + fx * v[i1, j1]
    res = (1 - fy) * top + fy * bot
    return res[0] if scalar else res
