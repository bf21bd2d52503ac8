"""Grid measures: the probability-mass-on-a-grid data model, metrics and file I/O.

A :class:`GridMeasure` is a nonnegative H x W mass grid summing to 1.  Cell
(row, col) sits at the point ((col + 0.5) / s, (row + 0.5) / s) with
s = max(H, W), so the longest grid side spans the unit interval and squared
distances are resolution independent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllZero,
    BadMagic,
    DimensionMismatch,
    MassNotNormalized,
    NegativeMass,
    ShapeMismatch,
    TruncatedFile,
)

MASS_TOL = 1e-6
REPAIR_TOL = 1e-4
KL_FLOOR = 1e-12

_WBGM_MAGIC = b"WBGM"
_WBGM_VERSION = 1


@dataclass(frozen=True)
class GridMeasure:
    """Immutable nonnegative mass grid with total mass 1."""

    mass: np.ndarray
    renormalized: bool = False

    def __post_init__(self):
        m = np.ascontiguousarray(self.mass, dtype=np.float64)
        if m.ndim != 2:
            raise DimensionMismatch(f"mass must be 2-D, got ndim={m.ndim}")
        h, w = m.shape
        if h < 2 or w < 2:
            raise DimensionMismatch(f"grid must be at least 2x2, got {h}x{w}")
        if not np.all(np.isfinite(m)):
            raise NegativeMass("mass contains non-finite entries")
        if np.any(m < 0):
            raise NegativeMass("mass contains negative entries")
        total = float(m.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise MassNotNormalized(f"total mass {total!r} is not 1 within {MASS_TOL}")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def height(self) -> int:
        return self.mass.shape[0]

    @property
    def width(self) -> int:
        return self.mass.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mass.shape

    def support(self) -> np.ndarray:
        """Boolean mask of cells carrying positive mass."""
        return self.mass > 0


@dataclass(frozen=True)
class BarycentricWeights:
    """Nonnegative weights, one per input measure, summing to 1."""

    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) < 2:
            raise ShapeMismatch("need at least 2 barycentric weights")
        if any(x < 0 for x in w):
            raise NegativeMass("barycentric weights must be nonnegative")
        if abs(sum(w) - 1.0) > 1e-9:
            raise MassNotNormalized(f"weights sum to {sum(w)!r}, expected 1")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def normalize(grid) -> GridMeasure:
    """Turn a nonnegative array into a GridMeasure by dividing by its total."""
    g = np.ascontiguousarray(grid, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise NegativeMass("grid contains NaN or inf entries")
    if np.any(g < 0):
        raise NegativeMass("grid contains negative entries")
    total = g.sum()
    if total <= 0:
        raise AllZero("grid has zero total mass")
    return GridMeasure(g / total)


def uniform_measure(height: int, width: int) -> GridMeasure:
    return GridMeasure(np.full((height, width), 1.0 / (height * width)))


def delta_measure(height: int, width: int, row: int, col: int) -> GridMeasure:
    m = np.zeros((height, width))
    m[row, col] = 1.0
    return GridMeasure(m)


def cell_coordinates(height: int, width: int) -> np.ndarray:
    """Cell-center coordinates, shape (H, W, 2) with [..., 0]=x (col), [..., 1]=y (row)."""
    s = float(max(height, width))
    xs = (np.arange(width) + 0.5) / s
    ys = (np.arange(height) + 0.5) / s
    out = np.empty((height, width, 2))
    out[..., 0] = xs[None, :]
    out[..., 1] = ys[:, None]
    return out


def _check_same_shape(p: GridMeasure, q: GridMeasure) -> None:
    if p.shape != q.shape:
        raise ShapeMismatch(f"shape {p.shape} vs {q.shape}")


def kl_divergence(p: GridMeasure, q: GridMeasure) -> float:
    """KL(p || q) with a 1e-12 additive floor on q only (p may hold exact zeros)."""
    _check_same_shape(p, q)
    pm = p.mass
    mask = pm > 0
    val = float(np.sum(pm[mask] * (np.log(pm[mask]) - np.log(q.mass[mask] + KL_FLOOR))))
    return max(val, 0.0)


def l1_distance(p: GridMeasure, q: GridMeasure) -> float:
    _check_same_shape(p, q)
    return float(np.abs(p.mass - q.mass).sum())


def save_measure(measure: GridMeasure, path) -> None:
    """Write the WBGM binary format (f32 LE payload, row-major)."""
    header = struct.pack(
        "<4sIII", _WBGM_MAGIC, _WBGM_VERSION, measure.height, measure.width
    )
    payload = measure.mass.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _load_wbgm(data: bytes, path) -> GridMeasure:
    if len(data) < 16:
        raise TruncatedFile(f"{path}: header incomplete ({len(data)} bytes)")
    magic, version, h, w = struct.unpack_from("<4sIII", data, 0)
    if version != _WBGM_VERSION:
        raise BadMagic(f"{path}: unsupported WBGM version {version}")
    if h < 2 or w < 2:
        raise DimensionMismatch(f"{path}: bad dimensions {h}x{w}")
    expected = 16 + 4 * h * w
    if len(data) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise DimensionMismatch(f"{path}: {len(data) - expected} trailing bytes")
    m = np.frombuffer(data, dtype="<f4", count=h * w, offset=16).astype(np.float64)
    m = m.reshape(h, w)
    if not np.all(np.isfinite(m)):
        raise NegativeMass(f"{path}: non-finite mass entries")
    if np.any(m < 0):
        raise NegativeMass(f"{path}: negative mass entries")
    total = float(m.sum())
    if abs(total - 1.0) <= MASS_TOL:
        return GridMeasure(m)
    if abs(total - 1.0) <= REPAIR_TOL:
        if total <= 0:
            raise AllZero(f"{path}: zero total mass")
        return GridMeasure(m / total, renormalized=True)
    raise MassNotNormalized(f"{path}: total mass {total!r} off by more than {REPAIR_TOL}")


def _load_pgm(data: bytes, path) -> GridMeasure:
    # binary P5, maxval <= 65535; values are mass before normalization
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedFile(f"{path}: PGM header incomplete")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(x) for x in fields)
    except ValueError as exc:
        raise BadMagic(f"{path}: malformed PGM header") from exc
    if maxval <= 0 or maxval > 65535:
        raise BadMagic(f"{path}: unsupported PGM maxval {maxval}")
    dtype = ">u2" if maxval > 255 else np.uint8
    itemsize = 2 if maxval > 255 else 1
    expected = pos + h * w * itemsize
    if len(data) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(data)}")
    raw = np.frombuffer(data, dtype=dtype, count=h * w, offset=pos)
    grid = raw.reshape(h, w).astype(np.float64)
    return normalize(grid)


def load_measure(path) -> GridMeasure:
    """Load a WBGM file, or ingest a binary P5 PGM (pixel value = unnormalized mass)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == _WBGM_MAGIC:
        return _load_wbgm(data, path)
    if data[:2] == b"P5":
        return _load_pgm(data, path)
    raise BadMagic(f"{path}: unrecognized magic {data[:4]!r}")


def save_pgm_preview(measure: GridMeasure, path) -> None:
    """8-bit PGM scaled so the largest mass maps to 255 (for visual inspection)."""
    peak = measure.mass.max()
    scale = 255.0 / peak if peak > 0 else 0.0
    img = np.rint(measure.mass * scale).astype(np.uint8)
    header = f"P5\n{measure.width} {measure.height}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.tobytes())
