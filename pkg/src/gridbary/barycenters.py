"""Barycenter generators: linearized one-step, k-step Lagrangian descent,
log-domain iterative Bregman projections, and sliced/Radon reconstruction.

The linearized method advects a uniform particle cloud by a weighted average
of precomputed uniform-to-input transport maps and splats the result back to
the grid with bilinear (area-weighted) deposition; the k-step variant repeats
the advection, re-solving the displacement fields from the current cloud at
every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeMismatch
from .measures import (
    BarycentricWeights,
    GridMeasure,
    cell_coordinates,
    normalize,
    uniform_measure,
)
from .sinkhorn import (
    DisplacementField,
    SolverConfig,
    _projection_to,
    displacement_field,
    log_kernel_apply,
    sinkhorn_divergence,
)
from .validation import check_measures, check_weights


@dataclass
class ParticleCloud:
    """Weighted particles in normalized coordinates."""

    positions: np.ndarray  # (n, 2)
    masses: np.ndarray  # (n,)


@dataclass
class PrecomputedMap:
    """Uniform-to-input displacement field with provenance."""

    source: str
    field: DisplacementField
    shape: tuple[int, int]


@lru_cache(maxsize=16)
def _uniform_self_projection(height: int, width: int, cfg: SolverConfig) -> np.ndarray:
    u = uniform_measure(height, width)
    out = _projection_to(u, u, cfg)
    out.setflags(write=False)
    return out


def precompute_map(mu: GridMeasure, cfg: SolverConfig, source: str = "") -> PrecomputedMap:
    """Displacement field from the uniform measure onto ``mu``."""
    u = uniform_measure(*mu.shape)
    self_proj = _uniform_self_projection(mu.height, mu.width, cfg)
    field = displacement_field(u, mu, cfg, self_projection=self_proj)
    return PrecomputedMap(source=source, field=field, shape=mu.shape)


def splat_bilinear(positions: np.ndarray, masses: np.ndarray, height: int, width: int) -> np.ndarray:
    """Deposit particle masses onto the grid with area weights; borders clamp."""
    s = float(max(height, width))
    gx = positions[:, 0] * s - 0.5
    gy = positions[:, 1] * s - 0.5
    j0 = np.floor(gx).astype(np.int64)
    i0 = np.floor(gy).astype(np.int64)
    fx = gx - j0
    fy = gy - i0
    grid = np.zeros((height, width))
    for di, dj, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        ii = np.clip(i0 + di, 0, height - 1)
        jj = np.clip(j0 + dj, 0, width - 1)
        np.add.at(grid, (ii, jj), masses * wgt)
    return grid


def _sample_field(field: np.ndarray, support: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Bilinear field lookup at particle positions, renormalized over support cells."""
    h, w = support.shape
    s = float(max(h, w))
    gx = np.clip(positions[:, 0] * s - 0.5, 0.0, w - 1.0)
    gy = np.clip(positions[:, 1] * s - 0.5, 0.0, h - 1.0)
    j0 = np.minimum(np.floor(gx).astype(np.int64), w - 2) if w > 1 else np.zeros_like(gx, np.int64)
    i0 = np.minimum(np.floor(gy).astype(np.int64), h - 2) if h > 1 else np.zeros_like(gy, np.int64)
    fx = gx - j0
    fy = gy - i0
    num = np.zeros((positions.shape[0], 2))
    den = np.zeros(positions.shape[0])
    for di, dj, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        ii = i0 + di
        jj = j0 + dj
        on = support[ii, jj]
        wm = np.where(on, wgt, 0.0)
        num += wm[:, None] * field[ii, jj]
        den += wm
    out = np.zeros_like(num)
    ok = den > 0
    out[ok] = num[ok] / den[ok, None]
    return out


def linearized_barycenter(maps, weights) -> GridMeasure:
    """Single-step barycenter: advect the uniform cloud by the weighted maps."""
    if not maps:
        raise ShapeMismatch("no transport maps given")
    lam = check_weights(weights, len(maps))
    shape = maps[0].shape
    for m in maps:
        if m.shape != shape:
            raise ShapeMismatch(f"map shapes differ: {shape} vs {m.shape}")
    h, w = shape
    positions = cell_coordinates(h, w).reshape(-1, 2).copy()
    masses = np.full(h * w, 1.0 / (h * w))
    step = np.zeros_like(positions)
    for lam_i, pm in zip(lam.weights, maps):
        step += lam_i * _sample_field(pm.field.vectors, pm.field.support, positions)
    return normalize(splat_bilinear(positions + step, masses, h, w))


def lagrangian_barycenter(inputs, weights, cfg: SolverConfig, k: int = 10) -> GridMeasure:
    """k-step Lagrangian descent from the uniform cloud; k=1 equals linearized."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ms = check_measures(inputs)
    lam = check_weights(weights, len(ms))
    h, w = ms[0].shape
    positions = cell_coordinates(h, w).reshape(-1, 2).copy()
    masses = np.full(h * w, 1.0 / (h * w))
    for step_idx in range(k):
        # the initial cloud IS the uniform measure; reuse its cached self-term
        if step_idx == 0:
            b = uniform_measure(h, w)
            self_proj = _uniform_self_projection(h, w, cfg)
        else:
            b = normalize(splat_bilinear(positions, masses, h, w))
            self_proj = _projection_to(b, b, cfg)
        step = np.zeros_like(positions)
        for lam_i, mu in zip(lam.weights, ms):
            field = displacement_field(b, mu, cfg, self_projection=self_proj)
            step += lam_i * _sample_field(field.vectors, field.support, positions)
        positions = positions + step
    return normalize(splat_bilinear(positions, masses, h, w))


def descent_objective(b: GridMeasure, inputs, weights, cfg: SolverConfig) -> float:
    """Weighted divergence objective sum_i lam_i * S_eps(b, mu_i)."""
    ms = check_measures([b] + list(inputs))
    lam = check_weights(weights, len(ms) - 1)
    return float(
        sum(l * sinkhorn_divergence(ms[0], mu, cfg) for l, mu in zip(lam.weights, ms[1:]))
    )


def regularized_barycenter(
    inputs, weights, reg: float = 1e-3, max_iters: int = 2000, tol: float = 1e-9
) -> GridMeasure:
    """Log-domain iterative Bregman projections; returns the blurred barycenter."""
    if reg <= 0:
        raise ValueError("reg must be positive")
    ms = check_measures(inputs)
    lam = check_weights(weights, len(ms)).as_array()
    h, w = ms[0].shape
    log_mu = []
    for m in ms:
        lm = np.full((h, w), -np.inf)
        sup = m.mass > 0
        lm[sup] = np.log(m.mass[sup])
        log_mu.append(lm)
    log_v = [np.zeros((h, w)) for _ in ms]
    log_b = np.full((h, w), -np.log(h * w))
    prev = np.exp(log_b)
    for _ in range(max_iters):
        log_ku = []
        for i in range(len(ms)):
            log_u = log_mu[i] - log_kernel_apply(log_v[i], reg)
            log_ku.append(log_kernel_apply(log_u, reg))
        log_b = sum(l * (lv + lku) for l, lv, lku in zip(lam, log_v, log_ku))
        log_v = [log_b - lku for lku in log_ku]
        b = np.exp(log_b)
        change = float(np.abs(b - prev).sum())
        prev = b
        if change <= tol:
            break
    return normalize(prev)


def quantile_function(hist: np.ndarray, edges: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Pseudo-inverse CDF of a 1-D histogram, linear within bins."""
    cdf = np.concatenate([[0.0], np.cumsum(hist)])
    cdf = cdf / cdf[-1]
    return np.interp(q, cdf, edges)


def quantile_average_histogram(hists, weights, edges: np.ndarray, n_samples: int) -> np.ndarray:
    """1-D Wasserstein barycenter of histograms by averaging quantile functions."""
    lam = np.asarray(weights, dtype=np.float64)
    q = (np.arange(n_samples) + 0.5) / n_samples
    pos = np.zeros(n_samples)
    for l, hist in zip(lam, hists):
        pos += l * quantile_function(np.asarray(hist, dtype=np.float64), edges, q)
    out, _ = np.histogram(pos, bins=edges)
    return out.astype(np.float64) / n_samples


def _ramp_filter(sinogram: np.ndarray, dt: float) -> np.ndarray:
    """Ram-Lak filtering of each projection (rows of the sinogram)."""
    n = sinogram.shape[-1]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    freqs = np.abs(np.fft.rfftfreq(nfft, d=dt))
    spec = np.fft.rfft(sinogram, n=nfft, axis=-1) * freqs
    return np.fft.irfft(spec, n=nfft, axis=-1)[..., :n]


def radon_barycenter(inputs, weights, n_dirs: int = 180) -> GridMeasure:
    """Sliced barycenter: per-direction quantile averaging, then filtered
    back-projection (Ram-Lak, linear interpolation), clamped and renormalized."""
    if n_dirs < 4:
        raise ValueError("n_dirs must be >= 4")
    ms = check_measures(inputs)
    lam = check_weights(weights, len(ms)).as_array()
    h, w = ms[0].shape
    s = float(max(h, w))
    coords = cell_coordinates(h, w).reshape(-1, 2)
    center = np.array([w / (2 * s), h / (2 * s)])
    rel = coords - center
    radius = float(np.sqrt((rel * rel).sum(axis=1)).max())
    dt = 1.0 / s
    n_half = int(np.ceil(radius / dt)) + 1
    n_t = 2 * n_half + 1
    edges = (np.arange(n_t + 1) - n_half - 0.5) * dt
    centers = (edges[:-1] + edges[1:]) / 2.0
    thetas = np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    masses = [m.mass.reshape(-1) for m in ms]
    sinogram = np.zeros((n_dirs, n_t))
    n_q = h * w
    for d in range(n_dirs):
        t = rel @ dirs[d]
        projs = [np.histogram(t, bins=edges, weights=mm)[0] for mm in masses]
        sinogram[d] = quantile_average_histogram(projs, lam, edges, n_q)
    filtered = _ramp_filter(sinogram, dt)
    img = np.zeros(h * w)
    for d in range(n_dirs):
        img += np.interp(rel @ dirs[d], centers, filtered[d])
    return normalize(np.clip(img, 0.0, None).reshape(h, w))
