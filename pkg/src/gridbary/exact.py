"""Exact linear-programming oracles for tiny instances.

These are test/baseline oracles, not production solvers: they hand the
transportation LP (and the two-input barycenter LP) to HiGHS on the support
cells and report the primal-dual gap of the returned vertex solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import Infeasible, TooLarge
from .measures import BarycentricWeights, GridMeasure, cell_coordinates, normalize
from .validation import check_measures, check_weights

_PLAN_ENTRY_LIMIT = 10**6
_BARYCENTER_CELL_LIMIT = 256  # up to 16x16 grids


@dataclass
class ExactPlan:
    cost: float
    plan: np.ndarray
    row_cells: np.ndarray
    col_cells: np.ndarray
    optimality_gap: float


def _support_cost(a: GridMeasure, b: GridMeasure):
    rows = np.flatnonzero(a.mass)
    cols = np.flatnonzero(b.mass)
    coords = cell_coordinates(*a.shape).reshape(-1, 2)
    diff = coords[rows, None, :] - coords[None, cols, :]
    return rows, cols, (diff * diff).sum(axis=-1)


def lp_ot(a: GridMeasure, b: GridMeasure) -> ExactPlan:
    """Exact quadratic-cost OT between two grid measures via the HiGHS simplex."""
    ms = check_measures([a, b])
    a, b = ms[0], ms[1]
    mass_gap = abs(float(a.mass.sum()) - float(b.mass.sum()))
    if mass_gap > 1e-9:
        raise Infeasible(f"total masses differ by {mass_gap:.3e}")
    rows, cols, cost = _support_cost(a, b)
    n, m = rows.size, cols.size
    if n * m > _PLAN_ENTRY_LIMIT:
        raise TooLarge(f"{n} x {m} plan entries exceed {_PLAN_ENTRY_LIMIT}")
    am = a.mass.reshape(-1)[rows]
    bm = b.mass.reshape(-1)[cols] * (am.sum() / b.mass.sum())
    # row-sum constraints then column-sum constraints on vec(pi), row-major
    data = np.ones(2 * n * m)
    row_idx = np.concatenate(
        [np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)]
    )
    col_idx = np.concatenate([np.arange(n * m), np.arange(n * m)])
    a_eq = sparse.csr_matrix((data, (row_idx, col_idx)), shape=(n + m, n * m))
    rhs = np.concatenate([am, bm])
    res = linprog(cost.reshape(-1), A_eq=a_eq, b_eq=rhs, method="highs")
    if res.status != 0:
        raise Infeasible(f"HiGHS failed: {res.message}")
    plan = res.x.reshape(n, m)
    dual = float(res.eqlin.marginals @ rhs)
    gap = abs(float(res.fun) - dual)
    return ExactPlan(float(res.fun), plan, rows, cols, gap)


def lp_barycenter(inputs, weights) -> tuple[GridMeasure, float]:
    """Exact two-input barycenter: one LP over (b, pi_1, pi_2) on support columns.

    Guarded to grids of at most 16x16 cells; returns the barycenter and the
    optimal objective value.
    """
    ms = check_measures(inputs)
    if len(ms) != 2:
        raise TooLarge("exact barycenter supports exactly 2 inputs")
    lam = check_weights(weights, 2)
    h, w = ms[0].shape
    n_cells = h * w
    if n_cells > _BARYCENTER_CELL_LIMIT:
        raise TooLarge(f"{h}x{w} grid exceeds {_BARYCENTER_CELL_LIMIT} cells")
    coords = cell_coordinates(h, w).reshape(-1, 2)
    supports = [np.flatnonzero(m.mass) for m in ms]
    sizes = [s.size for s in supports]
    # variables: [b (n_cells), vec(pi_1) (n_cells*s1), vec(pi_2) (n_cells*s2)]
    offsets = [n_cells, n_cells + n_cells * sizes[0]]
    n_vars = n_cells + n_cells * (sizes[0] + sizes[1])
    obj = np.zeros(n_vars)
    rows_i, cols_i, vals = [], [], []
    rhs = []
    row = 0
    for i, (m, sup, lam_i) in enumerate(zip(ms, supports, lam.weights)):
        off = offsets[i]
        s_i = sizes[i]
        diff = coords[:, None, :] - coords[sup][None, :, :]
        obj[off : off + n_cells * s_i] = lam_i * (diff * diff).sum(-1).reshape(-1)
        # columns of pi_i sum to mu_i on its support
        for j in range(s_i):
            idx = off + j + s_i * np.arange(n_cells)
            rows_i.extend([row] * n_cells)
            cols_i.extend(idx.tolist())
            vals.extend([1.0] * n_cells)
            rhs.append(float(m.mass.reshape(-1)[sup[j]]))
            row += 1
        # rows of pi_i sum to b
        for x in range(n_cells):
            idx = off + s_i * x + np.arange(s_i)
            rows_i.extend([row] * (s_i + 1))
            cols_i.extend(idx.tolist() + [x])
            vals.extend([1.0] * s_i + [-1.0])
            rhs.append(0.0)
            row += 1
    a_eq = sparse.csr_matrix((vals, (rows_i, cols_i)), shape=(row, n_vars))
    res = linprog(obj, A_eq=a_eq, b_eq=np.asarray(rhs), method="highs")
    if res.status != 0:
        raise Infeasible(f"HiGHS failed: {res.message}")
    b = np.clip(res.x[:n_cells], 0.0, None).reshape(h, w)
    return normalize(b), float(res.fun)
