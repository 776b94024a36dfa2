"""Upper-bound optimization problems.

* the bilinear program in ``(p_lambda, gamma_c)`` (closed form and grid
  oracle),
* the discretized mass-point LP with its epigraph formulation,
* the case split and two-point merge of the support reduction,
* a finite-difference check of the gradient bound on ``f2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .bounds import f1, f2
from .core import (ContractError, LinkStrengths, MassPointDistribution, NetworkParams,
                   ParameterError, SolverError, make_rng)
from .gdof import nontrivial_subregime
from .lp import simplex_max
from .regime import nontrivial_conditions

__all__ = [
    "MassPointDistribution", "OptSolution", "objective_p1", "solve_p1_closed",
    "solve_p1_grid", "grid_lipschitz_cell_bound", "solve_p4_lp", "p4_objective",
    "case_split", "reduce_to_two_points", "grad_f2_bound_check",
]

_RANGE_TOL = 1e-12
ACTIVE_TOL = 1e-9
DISCRETIZATION_BITS = 6.0


@dataclass(frozen=True)
class OptSolution:
    p_lambda: float
    gamma_c: float
    value: float
    active_term: Union[int, str]
    c_r12_sq: Optional[float] = None
    subregime: Optional[str] = None

    def to_dict(self) -> dict:
        return {"p_lambda": self.p_lambda, "gamma_c": self.gamma_c,
                "c_r12_sq": self.c_r12_sq, "value": self.value,
                "active_term": self.active_term, "subregime": self.subregime}


def objective_p1(p_lambda: float, gamma_c: float, params: NetworkParams) -> tuple:
    """Both terms of the bilinear program and their minimum (per ``log2 SNR``)."""
    T = params.T
    _, sr2, rd1, rd2 = params.gammas
    if not -_RANGE_TOL <= p_lambda <= 1 + _RANGE_TOL:
        raise ParameterError(f"p_lambda must be in [0, 1], got {p_lambda!r}")
    if not -_RANGE_TOL <= gamma_c <= rd1 + _RANGE_TOL:
        raise ParameterError(f"gamma_c must be in [0, gamma_rd1={rd1}], got {gamma_c!r}")
    p, g = p_lambda, gamma_c
    t1 = p * ((T - 1) * rd2 - g) + (T - 1) * (1 - p) * rd1
    t2 = (T - 1) * sr2 + (T - 2) * p * g + (T - 1) * (1 - p) * rd1
    return t1, t2, min(t1, t2)


def _active(t1, t2):
    if abs(t1 - t2) <= ACTIVE_TOL * max(1.0, abs(t1), abs(t2)):
        return "both"
    return 1 if t1 < t2 else 2


def solve_p1_closed(params: NetworkParams) -> OptSolution:
    """Closed-form maximizer of the bilinear program.

    ``params`` must be in the canonical nontrivial regime. When
    ``params.snr`` is set, ``c_r12_sq = snr**(gamma_c - gamma_rd1)``.
    """
    if not nontrivial_conditions(params.gammas, 1e-12):
        raise ContractError(f"exponents {params.gammas} are not in the canonical nontrivial regime")
    _, sr2, rd1, rd2 = params.gammas
    sub = nontrivial_subregime(params)
    if sub == "1":
        g = 0.0
        p = sr2 / rd2 if rd2 > 0 else 0.0
    elif sub == "2.1":
        g = rd1
        p = sr2 / (rd2 - rd1)
    else:
        g = rd2 - sr2
        p = 1.0
    p = min(max(p, 0.0), 1.0)
    g = min(max(g, 0.0), rd1)
    t1, t2, v = objective_p1(p, g, params)
    c2 = params.snr ** (g - rd1) if params.snr is not None else None
    return OptSolution(p, g, v, _active(t1, t2), c2, sub)


def solve_p1_grid(params: NetworkParams, resolution: int = 1001) -> OptSolution:
    """Brute-force maximum over a ``resolution x resolution`` grid of ``(p, gamma_c)``.

    Ties resolve to the lexicographically smallest ``(p, gamma_c)``.
    """
    if int(resolution) != resolution or resolution < 2:
        raise ParameterError("resolution must be an integer >= 2")
    T = params.T
    _, sr2, rd1, rd2 = params.gammas
    p = np.linspace(0.0, 1.0, resolution)[:, None]
    g = np.linspace(0.0, rd1, resolution)[None, :]
    t1 = p * ((T - 1) * rd2 - g) + (T - 1) * (1 - p) * rd1
    t2 = (T - 1) * sr2 + (T - 2) * p * g + (T - 1) * (1 - p) * rd1
    obj = np.minimum(t1, t2)
    i, j = np.unravel_index(int(np.argmax(obj)), obj.shape)
    pi, gj = float(p[i, 0]), float(g[0, j])
    a, b, v = objective_p1(pi, gj, params)
    c2 = params.snr ** (gj - rd1) if params.snr is not None else None
    return OptSolution(pi, gj, v, _active(a, b), c2, None)


def grid_lipschitz_cell_bound(params: NetworkParams, resolution: int) -> float:
    """Largest change of the bilinear objective across one grid cell."""
    T = params.T
    _, sr2, rd1, rd2 = params.gammas
    dp = 1.0 / (resolution - 1)
    dg = rd1 / (resolution - 1)
    lp = max(abs((T - 1) * (rd2 - rd1)) + rd1, (T - 1) * rd1 + abs(T - 2) * rd1)
    lg = max(1.0, abs(T - 2))
    return lp * dp + lg * dg


# ---------------------------------------------------------------------------
# Discretized LP
# ---------------------------------------------------------------------------

def p4_objective(dist: MassPointDistribution, rho: LinkStrengths, T: int) -> float:
    """``min(E f1, (T-1) log2 rho_sr2^2 + E f2)`` without power checks."""
    a, b, c = dist.points.T
    r1, r2 = rho.rho_rd1_sq, rho.rho_rd2_sq
    e1 = float(dist.probs @ f1(a, b, c, r1, r2, T))
    e2 = float(dist.probs @ f2(a, b, c, r1, r2, T))
    return min(e1, (T - 1) * math.log2(rho.rho_sr2_sq) + e2)


def _grid(step, grid_max):
    k = int(math.floor(grid_max / step + 1e-9))
    return step * np.arange(k + 1)


def solve_p4_lp(rho: LinkStrengths, T: int, grid_step: float, grid_max: float,
                max_points: int = 20_000) -> tuple:
    """Maximize the discretized cut-set objective over laws on a cubic grid.

    The epigraph LP is ``max t`` with ``t <= sum p f1``,
    ``t <= (T-1) log2 rho_sr2^2 + sum p f2``, ``sum p (a+b+c) <= 2T``,
    ``sum p = 1`` and ``p >= 0``. The simplex returns a basic optimum, so
    at most three grid points carry mass.

    Returns ``(MassPointDistribution, value)``.
    """
    if grid_step <= 0 or grid_max <= 0:
        raise ParameterError("grid_step and grid_max must be positive")
    if T < 2:
        raise ParameterError("T must be >= 2")
    g = _grid(grid_step, grid_max)
    if g.size ** 3 > max_points:
        raise SolverError(f"grid has {g.size ** 3} points, above max_points={max_points}; "
                          "use a coarser step or smaller grid_max")
    A, B, C = (x.ravel() for x in np.meshgrid(g, g, g, indexing="ij"))
    r1, r2 = rho.rho_rd1_sq, rho.rho_rd2_sq
    F1 = f1(A, B, C, r1, r2, T)
    F2 = f2(A, B, C, r1, r2, T)
    if not (np.all(np.isfinite(F1)) and np.all(np.isfinite(F2))):
        raise SolverError("non-finite objective coefficients on the grid")
    n = A.size
    K = (T - 1) * math.log2(rho.rho_sr2_sq)
    # variables: p (n), t_plus, t_minus
    c = np.zeros(n + 2)
    c[n], c[n + 1] = 1.0, -1.0
    A_ub = np.zeros((3, n + 2))
    A_ub[0, :n], A_ub[0, n], A_ub[0, n + 1] = -F1, 1.0, -1.0
    A_ub[1, :n], A_ub[1, n], A_ub[1, n + 1] = -F2, 1.0, -1.0
    A_ub[2, :n] = A + B + C
    b_ub = np.array([0.0, K, 2.0 * T])
    A_eq = np.zeros((1, n + 2))
    A_eq[0, :n] = 1.0
    res = simplex_max(c, A_ub, b_ub, A_eq, [1.0])
    p = res.x[:n]
    idx = np.nonzero(p > 1e-12)[0]
    if idx.size == 0:
        raise SolverError("LP returned no support points")
    probs = p[idx] / p[idx].sum()
    dist = MassPointDistribution(np.column_stack([A[idx], B[idx], C[idx]]), probs)
    return dist, float(res.value)


# ---------------------------------------------------------------------------
# Support reduction
# ---------------------------------------------------------------------------

def case_split(dist: MassPointDistribution, rho: LinkStrengths) -> MassPointDistribution:
    """Map each point to the ``(a, 0, c)`` or ``(0, d, d)`` family.

    A point keeps ``(a, 0, c)`` when ``rho_rd2^2 a >= rho_rd1^2 max(b, c)``;
    otherwise it becomes ``(0, d, d)`` with ``d = (b + c)/2``.
    """
    out = []
    for (a, b, c), p in zip(dist.points, dist.probs):
        if rho.rho_rd2_sq * a >= rho.rho_rd1_sq * max(b, c):
            out.append((a, 0.0, c))
        else:
            d = 0.5 * (b + c)
            out.append((0.0, d, d))
    return MassPointDistribution(np.array(out), dist.probs.copy())


def _log_mean_merge(x, w, rho_sq):
    """Coordinate whose ``log2(rho^2 x + 1)`` equals the weighted average."""
    if rho_sq == 0.0 or np.all(x == x[0]):
        return float(np.dot(w, x) / w.sum()) if rho_sq == 0.0 else float(x[0])
    avg = float(np.dot(w, np.log2(rho_sq * x + 1.0)) / w.sum())
    return float(np.expm1(avg * math.log(2.0)) / rho_sq)


def reduce_to_two_points(dist: MassPointDistribution, rho: LinkStrengths,
                         T: int) -> MassPointDistribution:
    """Merge the ``(a, 0, c)`` points and the ``(0, d, d)`` points into one each.

    Each merged coordinate keeps the probability-weighted average of
    ``log2(rho^2 x + 1)`` (``rho_rd2`` for ``a``, ``rho_rd1`` for ``c`` and
    ``d``), which by Jensen's inequality never raises the mean power.
    Points with ``b = 0`` belong to the first family.
    """
    pts, pr = dist.points, dist.probs
    fam_a = pts[:, 1] == 0.0
    fam_d = (~fam_a) & (pts[:, 0] == 0.0) & (pts[:, 1] == pts[:, 2])
    bad = ~(fam_a | fam_d)
    if np.any(bad):
        raise ContractError(f"points {pts[bad].tolist()} are neither (a,0,c) nor (0,d,d); "
                            "apply case_split first")
    if len(pr) == 1:
        return dist
    out_pts, out_pr = [], []
    if np.any(fam_a):
        w = pr[fam_a]
        a = _log_mean_merge(pts[fam_a, 0], w, rho.rho_rd2_sq)
        c = _log_mean_merge(pts[fam_a, 2], w, rho.rho_rd1_sq)
        out_pts.append((a, 0.0, c))
        out_pr.append(w.sum())
    if np.any(fam_d):
        w = pr[fam_d]
        d = _log_mean_merge(pts[fam_d, 1], w, rho.rho_rd1_sq)
        out_pts.append((0.0, d, d))
        out_pr.append(w.sum())
    out_pr = np.array(out_pr)
    return MassPointDistribution(np.array(out_pts), out_pr / out_pr.sum())


# ---------------------------------------------------------------------------
# Gradient bound
# ---------------------------------------------------------------------------

@dataclass
class GradientReport:
    bound_partial: float
    bound_norm: float
    max_partial_f2: float
    max_norm_f2: float
    max_partial_f1: float
    n_points: int
    fd_tol: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _fd_grad(fn, pts, rel_step):
    grads = np.empty_like(pts)
    for k in range(3):
        h = rel_step * np.maximum(1.0, np.abs(pts[:, k]))
        up, dn = pts.copy(), pts.copy()
        up[:, k] += h
        # stay inside the nonnegative orthant with a one-sided stencil at 0
        dn[:, k] = np.maximum(pts[:, k] - h, 0.0)
        grads[:, k] = (fn(up) - fn(dn)) / (up[:, k] - dn[:, k])
    return grads


def grad_f2_bound_check(rho: LinkStrengths, T: int, n_samples: int, seed=0,
                        rel_step: float = 1e-5, fd_tol: float = 1e-3,
                        box: Optional[float] = None) -> GradientReport:
    """Finite-difference check that every partial of ``f2`` is ``<= 2 rho_rd2^2``.

    Points are the origin plus ``n_samples - 1`` uniform draws from
    ``[0, box]^3`` (default ``box = 2T``, the total power budget).
    """
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    box = 2.0 * T if box is None else box
    rng = make_rng(seed)
    pts = np.vstack([np.zeros((1, 3)), rng.uniform(0.0, box, (n_samples - 1, 3))])
    r1, r2 = rho.rho_rd1_sq, rho.rho_rd2_sq
    g2 = _fd_grad(lambda x: f2(x[:, 0], x[:, 1], x[:, 2], r1, r2, T), pts, rel_step)
    g1 = _fd_grad(lambda x: f1(x[:, 0], x[:, 1], x[:, 2], r1, r2, T), pts, rel_step)
    bound = 2.0 * r2
    bound_norm = 2.0 * math.sqrt(3.0) * r2
    max_partial = float(np.max(np.abs(g2)))
    max_norm = float(np.max(np.linalg.norm(g2, axis=1)))
    passed = (max_partial <= bound * (1 + fd_tol) + fd_tol
              and max_norm <= bound_norm * (1 + fd_tol) + fd_tol)
    return GradientReport(bound, bound_norm, max_partial, max_norm,
                          float(np.max(np.abs(g1))), len(pts), fd_tol, passed,
                          {"grad_f2_origin": g2[0].tolist()})
