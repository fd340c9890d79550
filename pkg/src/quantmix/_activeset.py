"""Active-set solvers for (weighted) least squares with linear constraints.

Two routines:

* ``partial_nnls`` — Lawson-Hanson iteration for problems whose only
  constraints are non-negativity bounds on a subset of coefficients
  (the intercept stays free).  Works on the normal equations.
* ``active_set_qp`` — textbook primal active-set method for a convex
  quadratic objective with general linear inequality and equality rows.

Both return solutions whose KKT conditions are verifiable by the caller.
"""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleError, IterationLimitError

_FEAS_TOL = 1e-10


def _solve_psd(h_mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        sol = np.linalg.solve(h_mat, rhs)
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(h_mat, rhs, rcond=None)[0]


def partial_nnls(
    h_mat: np.ndarray,
    c_vec: np.ndarray,
    nonneg_mask: np.ndarray,
    max_iter: int | None = None,
    tol: float | None = None,
) -> np.ndarray:
    """Minimize ``0.5 x'Hx - c'x`` subject to ``x[i] >= 0`` where masked.

    ``H`` must be positive semi-definite with ``c`` in its range (both hold
    for normal equations ``H = A'A``, ``c = A'b``).  Unmasked coordinates are
    free and permanently part of the passive set.
    """
    n = len(c_vec)
    mask = np.asarray(nonneg_mask, dtype=bool)
    if max_iter is None:
        max_iter = 50 * max(n, 10)
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.max(np.abs(c_vec)))) + 1e-14

    x = np.zeros(n)
    passive = ~mask  # free coordinates start (and stay) passive
    if passive.any():
        idx = np.flatnonzero(passive)
        x[idx] = _solve_psd(h_mat[np.ix_(idx, idx)], c_vec[idx])

    for _ in range(max_iter):
        grad = c_vec - h_mat @ x  # negative gradient of the quadratic
        candidates = np.flatnonzero(mask & ~passive & (grad > tol))
        if candidates.size == 0:
            return x
        passive[candidates[np.argmax(grad[candidates])]] = True

        # Inner loop: restore feasibility of the passive-set solve.
        for _ in range(max_iter):
            idx = np.flatnonzero(passive)
            z = np.zeros(n)
            z[idx] = _solve_psd(h_mat[np.ix_(idx, idx)], c_vec[idx])
            bad = passive & mask & (z <= 0.0)
            if not bad.any():
                x = z
                break
            move = np.flatnonzero(bad)
            alpha = np.min(x[move] / (x[move] - z[move]))
            alpha = min(max(alpha, 0.0), 1.0)
            x = x + alpha * (z - x)
            drop = passive & mask & (x <= _FEAS_TOL * max(1.0, float(np.max(np.abs(x)))))
            x[drop] = 0.0
            passive &= ~drop
        else:
            raise IterationLimitError("partial_nnls inner loop failed to settle")
    raise IterationLimitError(f"partial_nnls did not converge in {max_iter} iterations")


def active_set_qp(
    h_mat: np.ndarray,
    c_vec: np.ndarray,
    x0: np.ndarray,
    a_ineq: np.ndarray | None = None,
    b_ineq: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    max_iter: int | None = None,
) -> np.ndarray:
    """Minimize ``0.5 x'Hx - c'x`` s.t. ``A_ineq x >= b_ineq``, ``A_eq x = b_eq``.

    ``x0`` must be feasible.  ``H`` should be positive definite on the
    null space of the active constraints (true for full-column-rank design
    matrices).
    """
    n = len(c_vec)
    g_mat = np.empty((0, n)) if a_ineq is None else np.asarray(a_ineq, dtype=float)
    g_rhs = np.empty(0) if b_ineq is None else np.asarray(b_ineq, dtype=float)
    e_mat = np.empty((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float)
    e_rhs = np.empty(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ineq = len(g_rhs)
    if max_iter is None:
        max_iter = 100 * (n + m_ineq + len(e_rhs) + 1)

    x = np.asarray(x0, dtype=float).copy()
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    if m_ineq and np.min(g_mat @ x - g_rhs) < -1e-8 * scale:
        raise InfeasibleError("active_set_qp starting point violates inequality constraints")
    if len(e_rhs) and np.max(np.abs(e_mat @ x - e_rhs)) > 1e-8 * scale:
        raise InfeasibleError("active_set_qp starting point violates equality constraints")

    working = np.zeros(m_ineq, dtype=bool)
    if m_ineq:
        working = np.abs(g_mat @ x - g_rhs) <= _FEAS_TOL * scale

    for _ in range(max_iter):
        act_idx = np.flatnonzero(working)
        c_rows = np.vstack([e_mat, g_mat[act_idx]]) if (len(e_rhs) + act_idx.size) else np.empty((0, n))
        c_rhs = np.concatenate([e_rhs, g_rhs[act_idx]])
        k = len(c_rhs)
        # Stationarity Hx - C'lam = c with lam >= 0 for active >= rows.
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = h_mat
        if k:
            kkt[:n, n:] = -c_rows.T
            kkt[n:, :n] = c_rows
        rhs = np.concatenate([c_vec, c_rhs])
        sol = _solve_psd(kkt, rhs)
        x_new, lam = sol[:n], sol[n:]

        step = x_new - x
        if np.max(np.abs(step), initial=0.0) <= 1e-11 * max(1.0, np.max(np.abs(x), initial=0.0)):
            # Stationary on the working set; check inequality multipliers.
            lam_ineq = lam[len(e_rhs):]
            if lam_ineq.size == 0 or np.min(lam_ineq) >= -1e-9:
                return x_new
            working[act_idx[np.argmin(lam_ineq)]] = False
            x = x_new
            continue

        # Step toward the subproblem optimum, stopping at the first
        # blocking inactive constraint.
        alpha = 1.0
        block = -1
        inactive = np.flatnonzero(~working)
        if inactive.size:
            denom = g_mat[inactive] @ step
            numer = g_rhs[inactive] - g_mat[inactive] @ x
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom < -1e-14, numer / denom, np.inf)
            j = int(np.argmin(ratios))
            if ratios[j] < alpha:
                alpha = max(float(ratios[j]), 0.0)
                block = inactive[j]
        x = x + alpha * step
        if block >= 0:
            working[block] = True
    raise IterationLimitError(f"active_set_qp did not converge in {max_iter} iterations")
