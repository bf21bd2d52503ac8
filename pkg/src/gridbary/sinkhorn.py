"""Entropic optimal transport on regular grids.

All solvers run in the log domain: with a quadratic ground cost the Gibbs
kernel exp(-|x - y|^2 / eps) factorizes over the two grid axes, so every
kernel application is two 1-D log-sum-exp passes instead of a dense
(H*W) x (H*W) product.  An epsilon-annealing loop (halving from ``eps_start``
and warm-starting the potentials) makes very small regularizations reachable.

Conventions: OT_eps(a, b) = min_pi <pi, C> + eps * KL(pi | a x b) with
C(x, y) = |x - y|^2 on the unit-normalized grid, so the optimal plan is
pi_ij = exp((f_i + g_j - C_ij) / eps) * a_i * b_j and the converged dual
value is <f, a> + <g, b>.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanTooLarge, ShapeMismatch, StaleDuals
from .measures import GridMeasure, cell_coordinates

_LSE_CHUNK_ENTRIES = 2**25  # cap temp arrays at ~256 MB of f64


@dataclass(frozen=True)
class SolverConfig:
    """Entropic solver settings (quadratic ground cost is fixed).

    eps is in squared normalized-distance units; tol is an L1 bound on the
    marginal violation of the induced plan.
    """

    eps: float = 1e-3
    max_iters: int = 10_000
    tol: float = 1e-6
    anneal: bool = True
    eps_start: float = 1.0
    inner_sweeps: int = 5

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.eps_start <= 0:
            raise ValueError("eps_start must be positive")


@dataclass
class SinkhornDiagnostics:
    iterations: int
    final_violation: float
    eps_schedule: list[float]
    converged: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "iterations": self.iterations,
                "final_violation": self.final_violation,
                "eps_schedule": self.eps_schedule,
                "converged": self.converged,
            }
        )


@dataclass
class DualPotentials:
    """Log-domain potentials on the grid; f belongs to the first measure."""

    f: np.ndarray
    g: np.ndarray
    eps: float
    diagnostics: SinkhornDiagnostics | None = None


@dataclass
class TransportPlan:
    """Dense plan restricted to the supports of the two measures."""

    matrix: np.ndarray
    row_cells: np.ndarray  # flat indices into the first measure's grid
    col_cells: np.ndarray
    shape: tuple[int, int]
    marginal_violation: float


@dataclass
class DisplacementField:
    """Per-cell 2-vectors in normalized coordinates; zero off-support."""

    vectors: np.ndarray  # (H, W, 2)
    support: np.ndarray = field(repr=False, default=None)


def epsilon_schedule(cfg: SolverConfig) -> list[float]:
    """Annealing levels: halve from eps_start down to (exactly) eps."""
    if not cfg.anneal or cfg.eps >= cfg.eps_start:
        return [cfg.eps]
    levels = [cfg.eps_start]
    while levels[-1] / 2.0 > cfg.eps:
        levels.append(levels[-1] / 2.0)
    levels.append(cfg.eps)
    return levels


def _log_kernel_1d(n: int, scale: float, eps: float) -> np.ndarray:
    """(n, n) matrix of -((i - j) / scale)^2 / eps."""
    idx = np.arange(n, dtype=np.float64)
    diff = (idx[:, None] - idx[None, :]) / scale
    return -(diff * diff) / eps


def _lse_pass(m: np.ndarray, log_k: np.ndarray) -> np.ndarray:
    """out[r, o] = logsumexp_c(m[r, c] + log_k[o, c]); -inf rows stay -inf."""
    rows, n_in = m.shape
    n_out = log_k.shape[0]
    chunk = max(1, _LSE_CHUNK_ENTRIES // max(1, n_out * n_in))
    out = np.empty((rows, n_out))
    for start in range(0, rows, chunk):
        t = m[start : start + chunk, None, :] + log_k[None, :, :]
        peak = t.max(axis=-1)
        safe = np.where(np.isfinite(peak), peak, 0.0)
        with np.errstate(divide="ignore"):
            out[start : start + chunk] = safe + np.log(
                np.exp(t - safe[..., None]).sum(axis=-1)
            )
    return out


def log_kernel_apply(m: np.ndarray, eps: float) -> np.ndarray:
    """Separable log-domain Gibbs-kernel application on an (H, W) log-mass grid."""
    h, w = m.shape
    s = float(max(h, w))
    cols = _lse_pass(m, _log_kernel_1d(w, s, eps))
    return _lse_pass(cols.T, _log_kernel_1d(h, s, eps)).T


def gaussian_kernel_apply(v: np.ndarray, eps: float) -> np.ndarray:
    """Apply k(x,y) = exp(-|x-y|^2/eps) to a grid as two separable 1-D passes."""
    v = np.asarray(v, dtype=np.float64)
    h, w = v.shape
    s = float(max(h, w))
    kc = np.exp(_log_kernel_1d(w, s, eps))
    kr = np.exp(_log_kernel_1d(h, s, eps))
    return kr @ v @ kc.T


def _log_mass(m: GridMeasure) -> np.ndarray:
    out = np.full(m.shape, -np.inf)
    sup = m.mass > 0
    out[sup] = np.log(m.mass[sup])
    return out


def _solve(a: GridMeasure, b: GridMeasure, cfg: SolverConfig):
    """Annealed alternating log-domain updates; returns (f, g, diagnostics)."""
    log_a = _log_mass(a)
    log_b = _log_mass(b)
    f = np.zeros(a.shape)
    g = np.zeros(b.shape)
    schedule = epsilon_schedule(cfg)
    sweeps = 0
    violation = np.inf
    converged = False
    for level, eps in enumerate(schedule):
        last = level == len(schedule) - 1
        while True:
            g = -eps * log_kernel_apply(log_a + f / eps, eps)
            f_new = -eps * log_kernel_apply(log_b + g / eps, eps)
            sweeps += 1
            if last:
                with np.errstate(over="ignore", invalid="ignore"):
                    ratio = np.abs(np.expm1((f - f_new) / eps))
                    row = np.where(a.mass > 0, a.mass * ratio, 0.0)
                violation = float(row.sum())
                f = f_new
                if violation <= cfg.tol:
                    converged = True
                    break
                if sweeps >= cfg.max_iters:
                    break
            else:
                f = f_new
                if sweeps % cfg.inner_sweeps == 0 or sweeps >= cfg.max_iters:
                    break
        if sweeps >= cfg.max_iters and not converged:
            break
    shift = float(f.mean())
    f = f - shift
    g = g + shift
    diag = SinkhornDiagnostics(sweeps, violation, schedule, converged)
    return f, g, diag


def sinkhorn_potentials(a: GridMeasure, b: GridMeasure, cfg: SolverConfig) -> DualPotentials:
    """Dual potentials of OT_eps(a, b); best-so-far with diagnostics if not converged.

    The cost is symmetric, so arguments are solved in a canonical byte order
    and swapped back; this makes OT_eps(a, b) and OT_eps(b, a) the exact same
    computation.
    """
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")
    swap = a.mass.tobytes() > b.mass.tobytes()
    first, second = (b, a) if swap else (a, b)
    f, g, diag = _solve(first, second, cfg)
    if swap:
        f, g = g, f
    return DualPotentials(f=f, g=g, eps=cfg.eps, diagnostics=diag)


def ot_eps(a: GridMeasure, b: GridMeasure, cfg: SolverConfig) -> float:
    """Entropic OT cost as the dual objective <f, a> + <g, b>."""
    pot = sinkhorn_potentials(a, b, cfg)
    return float(np.sum(pot.f * a.mass) + np.sum(pot.g * b.mass))


def sinkhorn_divergence(a: GridMeasure, b: GridMeasure, cfg: SolverConfig) -> float:
    """Debiased divergence OT(a,b) - (OT(a,a) + OT(b,b)) / 2; zero on a == b."""
    cross = ot_eps(a, b, cfg)
    return cross - 0.5 * ot_eps(a, a, cfg) - 0.5 * ot_eps(b, b, cfg)


def transport_plan(
    pot: DualPotentials, a: GridMeasure, b: GridMeasure, cfg: SolverConfig
) -> TransportPlan:
    """Materialize pi = exp((f + g - C)/eps) * a x b on the support cells."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")
    rows = np.flatnonzero(a.mass)
    cols = np.flatnonzero(b.mass)
    if rows.size * cols.size > 10**8:
        raise PlanTooLarge(f"{rows.size} x {cols.size} plan entries")
    coords = cell_coordinates(*a.shape).reshape(-1, 2)
    diff = coords[rows, None, :] - coords[None, cols, :]
    cost = (diff * diff).sum(axis=-1)
    fa = pot.f.reshape(-1)[rows]
    gb = pot.g.reshape(-1)[cols]
    am = a.mass.reshape(-1)[rows]
    bm = b.mass.reshape(-1)[cols]
    plan = np.exp((fa[:, None] + gb[None, :] - cost) / cfg.eps) * am[:, None] * bm[None, :]
    violation = float(
        np.abs(plan.sum(axis=1) - am).sum() + np.abs(plan.sum(axis=0) - bm).sum()
    )
    if violation > 10.0 * cfg.tol:
        raise StaleDuals(f"marginal violation {violation:.3e} exceeds 10x tol")
    return TransportPlan(plan, rows, cols, a.shape, violation)


def barycentric_projection(
    pot: DualPotentials, target: GridMeasure, eps: float
) -> np.ndarray:
    """Conditional-mean targets T(i) = sum_j pi_ij y_j / sum_j pi_ij, shape (H, W, 2).

    Only the second potential enters: the ratio cancels f and the source mass.
    """
    h, w = target.shape
    log_w = _log_mass(target) + pot.g / eps
    coords = cell_coordinates(h, w)
    log_den = log_kernel_apply(log_w, eps)
    out = np.empty((h, w, 2))
    for d in range(2):
        log_num = log_kernel_apply(log_w + np.log(coords[..., d]), eps)
        out[..., d] = np.exp(log_num - log_den)
    return out


def _projection_to(b: GridMeasure, mu: GridMeasure, cfg: SolverConfig) -> np.ndarray:
    pot = sinkhorn_potentials(b, mu, cfg)
    return barycentric_projection(pot, mu, cfg.eps)


def displacement_field(
    b: GridMeasure,
    mu: GridMeasure,
    cfg: SolverConfig,
    self_projection: np.ndarray | None = None,
) -> DisplacementField:
    """Debiased descent direction of the divergence objective at each cell of b.

    v_j is the barycentric-projection target of j under the (b, mu) plan minus
    the self-transport target under the (b, b) plan; passing a precomputed
    ``self_projection`` skips the second solve.
    """
    if b.shape != mu.shape:
        raise ShapeMismatch(f"shape {b.shape} vs {mu.shape}")
    toward = _projection_to(b, mu, cfg)
    if self_projection is None:
        self_projection = _projection_to(b, b, cfg)
    support = b.mass > 0
    vectors = np.where(support[..., None], toward - self_projection, 0.0)
    return DisplacementField(vectors=vectors, support=support)
