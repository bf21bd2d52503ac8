"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import warnings

import numpy as np

from .errors import ShapeMismatch
from .measures import BarycentricWeights, GridMeasure, normalize


def as_measure(obj) -> GridMeasure:
    """Accept a GridMeasure or a normalized nonnegative array."""
    if isinstance(obj, GridMeasure):
        return obj
    return GridMeasure(np.asarray(obj, dtype=np.float64))


def check_measures(measures) -> list[GridMeasure]:
    """Validate a collection of measures sharing one grid shape."""
    ms = [as_measure(m) for m in measures]
    if len(ms) < 2:
        raise ShapeMismatch("need at least 2 input measures")
    shape = ms[0].shape
    for m in ms[1:]:
        if m.shape != shape:
            raise ShapeMismatch(f"input shapes differ: {shape} vs {m.shape}")
    return ms


def check_weights(weights, n_inputs: int, renormalize: bool = False) -> BarycentricWeights:
    """Validate barycentric weights; optionally repair their sum with a warning."""
    if isinstance(weights, BarycentricWeights):
        w = np.asarray(weights.weights, dtype=np.float64)
    else:
        w = np.asarray(list(weights), dtype=np.float64)
    if w.size != n_inputs:
        raise ShapeMismatch(f"{w.size} weights for {n_inputs} inputs")
    total = float(w.sum())
    if renormalize and total > 0 and abs(total - 1.0) > 1e-9:
        warnings.warn(f"weights sum to {total:.6g}; renormalizing", stacklevel=2)
        w = w / total
    return BarycentricWeights(tuple(w))


def as_probability_grid(arr) -> GridMeasure:
    """Normalize an arbitrary nonnegative array into a GridMeasure."""
    return normalize(np.asarray(arr, dtype=np.float64))
