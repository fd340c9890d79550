"""Dense two-phase primal simplex for small and medium linear programs.

The entry point ``solve_lp`` accepts the usual inequality/equality form with
optionally free variables, converts to standard form (free-variable splitting
plus slacks), and runs a tableau simplex with Dantzig pricing, falling back
to Bland's rule after a degenerate stall to guarantee termination.
"""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleError, IterationLimitError, UnboundedError

_TOL = 1e-9
_RATIO_TOL = 1e-11


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    colvals = tableau[:, col].copy()
    colvals[row] = 0.0
    tableau -= np.outer(colvals, tableau[row])
    basis[row] = col


def _run_simplex(
    tableau: np.ndarray,
    basis: np.ndarray,
    n_real: int,
    max_iter: int,
) -> None:
    """Iterate until the reduced-cost row (last row) is non-negative.

    Only the first ``n_real`` columns are eligible to enter (artificials are
    excluded once they leave).
    """
    m = tableau.shape[0] - 1
    stall = 0
    bland = False
    last_obj = tableau[-1, -1]
    for _ in range(max_iter):
        costs = tableau[-1, :n_real]
        if bland:
            negative = np.flatnonzero(costs < -_TOL)
            if negative.size == 0:
                return
            col = int(negative[0])
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -_TOL:
                return
        colvals = tableau[:m, col]
        rhs = tableau[:m, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(colvals > _RATIO_TOL, rhs / colvals, np.inf)
        row = int(np.argmin(ratios))
        if not np.isfinite(ratios[row]):
            raise UnboundedError("linear program is unbounded below")
        _pivot(tableau, basis, row, col)
        # The stored entry is minus the objective, so progress means growth.
        obj = tableau[-1, -1]
        if obj <= last_obj + 1e-13 * max(1.0, abs(last_obj)):
            stall += 1
            if stall > 2 * m + 20:
                bland = True
        else:
            stall = 0
        last_obj = obj
    raise IterationLimitError("simplex hit its pivot limit")


def solve_lp(
    c: np.ndarray,
    a_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    free_mask: np.ndarray | None = None,
    max_iter: int | None = None,
) -> tuple[np.ndarray, float]:
    """Minimize ``c'x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``.

    Variables are non-negative except where ``free_mask`` is True.  Returns
    ``(x, objective)`` at an optimal vertex.

    Raises
    ------
    InfeasibleError, UnboundedError, IterationLimitError
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    free = np.zeros(n, dtype=bool) if free_mask is None else np.asarray(free_mask, dtype=bool)
    a_ub = np.empty((0, n)) if a_ub is None else np.asarray(a_ub, dtype=float)
    b_ub = np.empty(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    a_eq = np.empty((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float)
    b_eq = np.empty(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = len(b_ub), len(b_eq)
    m = m_ub + m_eq

    # Standard-form columns: split free variables, append slacks.
    n_free = int(np.count_nonzero(free))
    split_cols = n + n_free + m_ub
    a_full = np.vstack([a_ub, a_eq]) if m else np.empty((0, n))
    a_std = np.zeros((m, split_cols))
    a_std[:, :n] = a_full
    if n_free:
        a_std[:, n : n + n_free] = -a_full[:, free]
    if m_ub:
        a_std[:m_ub, n + n_free :] = np.eye(m_ub)
    b_std = np.concatenate([b_ub, b_eq])
    c_std = np.zeros(split_cols)
    c_std[:n] = c
    if n_free:
        c_std[n : n + n_free] = -c[free]

    neg = b_std < 0.0
    a_std[neg] *= -1.0
    b_std = np.abs(b_std)

    # Phase 1: artificial identity basis.
    n_real = split_cols
    tableau = np.zeros((m + 1, n_real + m + 1))
    tableau[:m, :n_real] = a_std
    tableau[:m, n_real : n_real + m] = np.eye(m)
    tableau[:m, -1] = b_std
    tableau[-1, :n_real] = -a_std.sum(axis=0)
    tableau[-1, -1] = -b_std.sum()
    basis = np.arange(n_real, n_real + m)

    if max_iter is None:
        max_iter = 20000 + 60 * (m + n_real)

    scale = max(1.0, float(np.max(np.abs(b_std), initial=0.0)))
    _run_simplex(tableau, basis, n_real, max_iter)
    if tableau[-1, -1] < -1e-8 * scale:
        raise InfeasibleError("linear constraints admit no feasible point")

    # Drive remaining artificials out of the basis (or drop redundant rows).
    keep_rows = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n_real:
            row = tableau[r, :n_real]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                _pivot(tableau, basis, r, int(cand[0]))
            else:
                keep_rows[r] = False
    if not keep_rows.all():
        rows = np.flatnonzero(keep_rows)
        tableau = np.vstack([tableau[rows], tableau[-1:]])
        basis = basis[rows]
        m = len(rows)

    # Phase 2: rebuild the reduced-cost row for the true objective.
    tableau = np.hstack([tableau[:, :n_real], tableau[:, -1:]])
    cost_basis = c_std[basis]
    tableau[-1, :n_real] = c_std - cost_basis @ tableau[:m, :n_real]
    tableau[-1, :n_real][basis] = 0.0
    tableau[-1, -1] = -float(cost_basis @ tableau[:m, -1])
    _run_simplex(tableau, basis, n_real, max_iter)

    z = np.zeros(n_real)
    z[basis] = tableau[:m, -1]
    x = z[:n]
    if n_free:
        x = x.copy()
        x[free] -= z[n : n + n_free]
    return x, float(c @ x)
