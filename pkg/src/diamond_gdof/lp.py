"""Small dense two-phase simplex for LPs with a handful of rows.

Solves ``max c@x  s.t.  A_ub@x <= b_ub, A_eq@x = b_eq, x >= 0`` on a
full tableau. Intended for the epigraph LPs in :mod:`diamond_gdof.optim`
which have at most four rows and many columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SolverError

_EPS = 1e-10


@dataclass
class LpResult:
    x: np.ndarray
    value: float
    basis: np.ndarray  # column index of the basic variable in each row
    iterations: int


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]


def _run(tab, basis, n_allowed, max_iter):
    """Maximize the objective stored as the last row (reduced costs negated)."""
    m = tab.shape[0] - 1
    it = 0
    while True:
        obj = tab[-1, :n_allowed]
        col = int(np.argmin(obj))
        if obj[col] >= -_EPS:
            return it
        colv = tab[:m, col]
        pos = colv > _EPS
        if not np.any(pos):
            raise SolverError("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / colv[pos]
        rmin = ratios.min()
        # lowest basic index among ties keeps the rule anti-cycling (Bland)
        ties = np.nonzero(ratios <= rmin + _EPS * max(1.0, abs(rmin)))[0]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(tab, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise SolverError("simplex iteration limit reached")


def simplex_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter=10_000) -> LpResult:
    """Maximize ``c @ x`` subject to the given rows and ``x >= 0``.

    Right-hand sides may have any sign; rows are flipped internally.
    Raises :class:`SolverError` on infeasibility or unboundedness.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, float))
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x | slacks | artificials | rhs
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # rows whose slack enters with +1 can start basic; the rest need artificials
    basis = np.full(m, -1)
    for r in range(m_ub):
        if not neg[r]:
            basis[r] = n + r
    art_rows = np.nonzero(basis < 0)[0]
    n_struct = n + m_ub
    n_art = art_rows.size
    tab = np.zeros((m + 1, n_struct + n_art + 1))
    tab[:m, :n_struct] = A
    tab[:m, -1] = b
    for k, r in enumerate(art_rows):
        tab[r, n_struct + k] = 1.0
        basis[r] = n_struct + k

    iters = 0
    if n_art:
        # phase 1: maximize -sum(artificials)
        tab[-1, n_struct:n_struct + n_art] = 1.0
        for r in art_rows:
            tab[-1] -= tab[r]
        iters += _run(tab, basis, n_struct + n_art, max_iter)
        if tab[-1, -1] < -1e-8 * max(1.0, np.abs(b).max()):
            raise SolverError(f"LP is infeasible (phase-1 residual {-tab[-1, -1]:.3g})")
        # drive remaining artificials out of the basis
        for r in range(m):
            if basis[r] >= n_struct:
                cand = np.nonzero(np.abs(tab[r, :n_struct]) > 1e-9)[0]
                if cand.size:
                    _pivot(tab, r, int(cand[0]))
                    basis[r] = int(cand[0])
        tab[:, n_struct:n_struct + n_art] = 0.0

    # phase 2
    tab[-1] = 0.0
    tab[-1, :n] = -c
    for r in range(m):
        j = basis[r]
        if j < n_struct and tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[r]
    iters += _run(tab, basis, n_struct, max_iter)

    x_full = np.zeros(n_struct + n_art)
    for r in range(m):
        x_full[basis[r]] = tab[r, -1]
    x = x_full[:n]
    return LpResult(x=x, value=float(c @ x), basis=basis.copy(), iterations=iters)
