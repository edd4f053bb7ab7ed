"""Two-phase dense tableau simplex for small linear programs.

Solves ``min c @ x`` s.t. ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``,
``x >= 0``.  Pricing is Dantzig's rule; after a run of degenerate pivots it
falls back to Bland's rule, which cannot cycle.  Ties always go to the
lowest index, so results are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    x: np.ndarray | None
    fun: float
    status: str
    iterations: int


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray, tol: float):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, n_cols: int, max_iter: int, degenerate_limit: int = 50) -> str:
        """Optimize over the first ``n_cols`` columns; objective is the last row."""
        T, tol = self.T, self.tol
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                return ITERATION_LIMIT
            reduced = T[-1, :n_cols]
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return OPTIMAL
            if degenerate >= degenerate_limit:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmin(reduced[candidates])])
            col = T[:-1, j]
            rows = np.flatnonzero(col > tol)
            if rows.size == 0:
                return UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            tied = rows[ratios <= best + tol * max(1.0, abs(best))]
            r = int(tied[np.argmin(self.basis[tied])])
            degenerate = degenerate + 1 if T[r, -1] <= tol else 0
            self.pivot(r, j)


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
             tol: float = 1e-9, max_iter: int | None = None) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x | slacks | artificials | rhs
    rows = np.zeros((m, n + m_ub))
    rows[:m_ub, :n] = A_ub
    rows[:m_ub, n:] = np.eye(m_ub)
    rows[m_ub:, :n] = A_eq
    rhs = np.concatenate([b_ub, b_eq])
    flip = rhs < 0
    rows[flip] *= -1
    rhs = np.abs(rhs)
    need_art = np.ones(m, dtype=bool)
    need_art[:m_ub] = flip[:m_ub]
    art_rows = np.flatnonzero(need_art)
    n_art = art_rows.size
    N = n + m_ub + n_art

    T = np.zeros((m + 1, N + 1))
    T[:m, :n + m_ub] = rows
    T[art_rows, n + m_ub + np.arange(n_art)] = 1.0
    T[:m, -1] = rhs
    basis = np.empty(m, dtype=np.int64)
    basis[:m_ub] = n + np.arange(m_ub)
    basis[art_rows] = n + m_ub + np.arange(n_art)
    max_iter = max_iter or 50 * (m + N + 10)
    tab = _Tableau(T, basis, tol)
    scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))

    if n_art:
        T[-1, n + m_ub:N] = 1.0
        T[-1] -= T[art_rows].sum(axis=0)
        status = tab.run(N, max_iter)
        if status == ITERATION_LIMIT:
            return LPResult(None, np.nan, status, tab.iterations)
        if -T[-1, -1] > tol * scale * max(1, m):
            return LPResult(None, np.nan, INFEASIBLE, tab.iterations)
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= n + m_ub:
                nz = np.flatnonzero(np.abs(T[r, :n + m_ub]) > tol)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                else:
                    keep[r] = False
        T = np.vstack([T[:m][keep], T[-1:]])
        T = np.delete(T, np.arange(n + m_ub, N), axis=1)
        tab.T = T
        tab.basis = tab.basis[keep]
    m = tab.basis.size
    T = tab.T
    T[-1] = 0.0
    T[-1, :n] = c
    for r in range(m):
        b = tab.basis[r]
        if T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[r]
    status = tab.run(n + m_ub, max_iter)
    if status != OPTIMAL:
        return LPResult(None, np.nan, status, tab.iterations)
    x = np.zeros(n + m_ub)
    x[tab.basis] = T[:m, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult(x, float(c @ x), OPTIMAL, tab.iterations)
