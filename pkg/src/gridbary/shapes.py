"""Random CSG shape contours and paired barycenter datasets.

Shapes are built by combining filled primitives (ellipse, triangle,
rectangle, line) with boolean operators; the composition depth follows an
equal-weight mixture of U(0, 50), N(0, 2.5) and N(50, 2.5), rounded and
clamped, which favors both very simple and very complex shapes.  Contours are
the Sobel gradient magnitude of the mask, normalized to a GridMeasure.

Determinism contract: every shape and every pair derives its own RNG stream
from (seed, stream, index), so serial and parallel generation agree byte for
byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import AllZero, DegenerateShape
from .measures import GridMeasure, load_measure, normalize, save_measure

_SHAPE_STREAM = 0
_PAIR_STREAM = 1

DEPTH_MAX = 50


@dataclass(frozen=True)
class ShapeGenConfig:
    grid_size: int = 64
    seed: int = 0
    primitives: tuple[str, ...] = ("ellipse", "triangle", "rectangle", "line")
    depth_uniform_high: float = 50.0
    depth_normal_sigma: float = 2.5
    line_thickness: float | None = None  # None: 2 cells at 512 scale, proportional

    def __post_init__(self):
        if self.grid_size < 32:
            raise ValueError("grid_size must be >= 32")
        if not self.primitives:
            raise ValueError("need at least one primitive kind")

    def thickness(self) -> float:
        if self.line_thickness is not None:
            return float(self.line_thickness)
        return max(1.0, 2.0 * self.grid_size / 512.0)


@dataclass
class ManifestRecord:
    inputs: list[str]
    weights: list[float]
    target: str
    seed: int
    depths: list[int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "inputs": self.inputs,
                "weights": self.weights,
                "target": self.target,
                "seed": self.seed,
                "depths": self.depths,
            },
            sort_keys=True,
        )


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    root: Path | None = field(default=None, repr=False)

    def write(self, path) -> None:
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(rec.to_json() + "\n")

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        path = Path(path)
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                records.append(
                    ManifestRecord(
                        inputs=list(d["inputs"]),
                        weights=[float(x) for x in d["weights"]],
                        target=d["target"],
                        seed=int(d["seed"]),
                        depths=[int(x) for x in d["depths"]],
                    )
                )
        return cls(records=records, root=path.parent)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p


def sample_depth(rng: np.random.Generator, return_branch: bool = False):
    """Draw a composition depth from the three-branch mixture, clamped to [0, 50]."""
    branch = int(rng.integers(3))
    if branch == 0:
        x = rng.uniform(0.0, DEPTH_MAX)
    elif branch == 1:
        x = rng.normal(0.0, 2.5)
    else:
        x = rng.normal(DEPTH_MAX, 2.5)
    d = int(np.clip(round(x), 0, DEPTH_MAX))
    return (d, branch) if return_branch else d


def _grids(n: int):
    ys, xs = np.mgrid[0:n, 0:n]
    return xs.astype(np.float64), ys.astype(np.float64)


def _ellipse(rng, n, lo, hi):
    cx, cy = rng.uniform(0.1 * n, 0.9 * n, size=2)
    a, b = rng.uniform(lo, hi, size=2)
    phi = rng.uniform(0.0, np.pi)
    xs, ys = _grids(n)
    dx, dy = xs - cx, ys - cy
    u = (dx * np.cos(phi) + dy * np.sin(phi)) / a
    v = (-dx * np.sin(phi) + dy * np.cos(phi)) / b
    return u * u + v * v <= 1.0


def _rectangle(rng, n, lo, hi):
    cx, cy = rng.uniform(0.1 * n, 0.9 * n, size=2)
    a, b = rng.uniform(lo, hi, size=2)
    phi = rng.uniform(0.0, np.pi)
    xs, ys = _grids(n)
    dx, dy = xs - cx, ys - cy
    u = dx * np.cos(phi) + dy * np.sin(phi)
    v = -dx * np.sin(phi) + dy * np.cos(phi)
    return (np.abs(u) <= a) & (np.abs(v) <= b)


def _triangle(rng, n, lo, hi):
    cx, cy = rng.uniform(0.1 * n, 0.9 * n, size=2)
    radii = rng.uniform(lo, hi, size=3)
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=3))
    px = cx + radii * np.cos(angles)
    py = cy + radii * np.sin(angles)
    xs, ys = _grids(n)
    mask = np.ones((n, n), dtype=bool)
    for i in range(3):
        x0, y0 = px[i], py[i]
        x1, y1 = px[(i + 1) % 3], py[(i + 1) % 3]
        cross = (x1 - x0) * (ys - y0) - (y1 - y0) * (xs - x0)
        mask &= cross >= 0
    return mask


def _line(rng, n, thickness):
    p0 = rng.uniform(0.1 * n, 0.9 * n, size=2)
    p1 = rng.uniform(0.1 * n, 0.9 * n, size=2)
    xs, ys = _grids(n)
    d = p1 - p0
    denom = float(d @ d)
    if denom == 0.0:
        t = np.zeros_like(xs)
    else:
        t = np.clip(((xs - p0[0]) * d[0] + (ys - p0[1]) * d[1]) / denom, 0.0, 1.0)
    dist2 = (xs - (p0[0] + t * d[0])) ** 2 + (ys - (p0[1] + t * d[1])) ** 2
    return dist2 <= (thickness / 2.0) ** 2


def random_primitive(rng: np.random.Generator, config: ShapeGenConfig) -> np.ndarray:
    n = config.grid_size
    lo, hi = 0.04 * n, 0.40 * n
    kind = config.primitives[int(rng.integers(len(config.primitives)))]
    if kind == "ellipse":
        return _ellipse(rng, n, lo, hi)
    if kind == "rectangle":
        return _rectangle(rng, n, lo, hi)
    if kind == "triangle":
        return _triangle(rng, n, lo, hi)
    if kind == "line":
        return _line(rng, n, config.thickness())
    raise ValueError(f"unknown primitive kind {kind!r}")


def compose_csg(rng: np.random.Generator, depth: int, config: ShapeGenConfig) -> np.ndarray:
    """Compose depth+1 primitives with OR/AND/XOR/NOT; retries empty results.

    NOT is unary: it complements the running mask before OR-ing the fresh
    primitive drawn for that step.
    """
    if not 0 <= depth <= DEPTH_MAX:
        raise ValueError(f"depth {depth} outside [0, {DEPTH_MAX}]")
    for _ in range(20):
        mask = random_primitive(rng, config)
        for _ in range(depth):
            prim = random_primitive(rng, config)
            op = int(rng.integers(4))
            if op == 0:
                mask = mask | prim
            elif op == 1:
                mask = mask & prim
            elif op == 2:
                mask = mask ^ prim
            else:
                mask = (~mask) | prim
        if mask.any():
            return mask
    raise DegenerateShape(f"empty mask after 20 attempts at depth {depth}")


def sobel_contour(mask: np.ndarray) -> GridMeasure:
    """Gradient-magnitude contour of a binary mask (replicate-padded Sobel)."""
    m = np.asarray(mask, dtype=np.float64)
    gx = ndimage.sobel(m, axis=1, mode="nearest")
    gy = ndimage.sobel(m, axis=0, mode="nearest")
    return normalize(np.hypot(gx, gy))


def random_contour(rng: np.random.Generator, config: ShapeGenConfig):
    """One random contour measure and its composition depth."""
    for _ in range(20):
        d = sample_depth(rng)
        mask = compose_csg(rng, d, config)
        try:
            return sobel_contour(mask), d
        except AllZero:  # full-canvas mask has no contour; redraw
            continue
    raise DegenerateShape("could not produce a non-constant mask in 20 attempts")


def generate_dataset(
    config: ShapeGenConfig,
    n_shapes: int,
    n_pairs: int,
    oracle,
    out_dir,
    lambda_low: float = 0.05,
    lambda_high: float = 0.95,
) -> DatasetManifest:
    """Generate shapes, sample weighted pairs, and compute oracle targets.

    ``oracle`` is called as oracle(measures, weights) -> GridMeasure.  Files
    land under out_dir/{shapes,targets}; the manifest stores relative paths.
    """
    if n_shapes < 1 or n_pairs < 1:
        raise ValueError("n_shapes and n_pairs must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "shapes").mkdir(parents=True, exist_ok=True)
    (out_dir / "targets").mkdir(parents=True, exist_ok=True)
    shapes = []
    depths = []
    for i in range(n_shapes):
        rng = np.random.default_rng([config.seed, _SHAPE_STREAM, i])
        measure, d = random_contour(rng, config)
        rel = f"shapes/shape_{i:05d}.wbgm"
        save_measure(measure, out_dir / rel)
        shapes.append((rel, measure))
        depths.append(d)
    records = []
    for j in range(n_pairs):
        rng = np.random.default_rng([config.seed, _PAIR_STREAM, j])
        idx = rng.integers(n_shapes, size=2)
        lam1 = float(rng.uniform(lambda_low, lambda_high))
        weights = [lam1, 1.0 - lam1]
        measures = [shapes[int(i)][1] for i in idx]
        target = oracle(measures, weights)
        rel_target = f"targets/pair_{j:05d}.wbgm"
        save_measure(target, out_dir / rel_target)
        records.append(
            ManifestRecord(
                inputs=[shapes[int(i)][0] for i in idx],
                weights=weights,
                target=rel_target,
                seed=config.seed,
                depths=[depths[int(i)] for i in idx],
            )
        )
    manifest = DatasetManifest(records=records, root=out_dir)
    manifest.write(out_dir / "manifest.jsonl")
    return manifest


def load_record(manifest: DatasetManifest, record: ManifestRecord):
    """Materialize a record's input measures and target."""
    inputs = [load_measure(manifest.resolve(p)) for p in record.inputs]
    target = load_measure(manifest.resolve(record.target))
    return inputs, record.weights, target
