"""Constrained estimation of mixture quantile coefficients.

Weighted L2 fits run through a closed form, a Lawson-Hanson active set, or a
general active-set QP depending on the constraint mix; weighted L1 fits run
through a linear program (own dense simplex for small row counts, HiGHS via
scipy for large ones).  Cardinality constraints are solved exactly by branch
and bound, sparsity alternatively by a non-negative LASSO.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.special import ndtri

from . import metrics as _metrics
from ._activeset import active_set_qp, partial_nnls
from ._bnb import branch_and_bound
from ._integrate import unit_integral
from ._simplex import solve_lp
from .basis import BasisFunction
from .design import DesignProblem, order_stat_covariance
from .errors import (
    DomainError,
    InfeasibleError,
    IterationLimitError,
    ParameterError,
    RankDeficiencyError,
    SolverError,
    UnboundedError,
)

__all__ = [
    "ConstraintSet",
    "FitResult",
    "LMomentRows",
    "fit_wls",
    "fit_lad",
    "fit_cardinality",
    "fit_lasso",
    "lasso_path_to_cardinality",
    "cvar_coefficients",
    "lmoment_constraint_rows",
    "asymptotic_covariance",
]

NONZERO_TOL = 1e-8
SIMPLEX_ROW_LIMIT = 250
_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ConstraintSet:
    """Feasible-set description for the regression.

    nonneg
        Non-negativity of all non-intercept coefficients (the intercept is
        never constrained).
    cardinality
        Upper bound on the number of non-zero non-intercept coefficients.
    var_bounds
        Optional per-coefficient (lower, upper) bounds entering the
        mixed-integer transform of the cardinality constraint; only used by
        ``fit_cardinality``.
    var_constraints / cvar_constraints
        Tail constraints ``sum_i theta_i Q_i(p) <= E`` (direction "le") or
        ``>= E`` ("ge"); CVaR rows use the upper tail averages of the bases.
    lmoment
        ``(order, eps, target)``: bound the L1 distance between the model's
        L-moments of orders 1..m and the target vector by eps.
    """

    nonneg: bool = False
    cardinality: int | None = None
    var_bounds: tuple[tuple[float, float], ...] | None = None
    var_constraints: tuple[tuple[float, float, str], ...] = ()
    cvar_constraints: tuple[tuple[float, float, str], ...] = ()
    lmoment: tuple[int, float, tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.cardinality is not None and self.cardinality < 1:
            raise ParameterError(f"cardinality bound must be >= 1, got {self.cardinality}")
        if self.var_bounds is not None:
            for lo, hi in self.var_bounds:
                if lo > hi:
                    raise ParameterError(f"variable bounds must satisfy l <= u, got ({lo}, {hi})")
        for level, _, direction in self.var_constraints + self.cvar_constraints:
            if direction not in ("le", "ge"):
                raise ParameterError(f"constraint direction must be 'le' or 'ge', got {direction!r}")
            if not 0.0 < level < 1.0:
                raise DomainError(f"constraint level must lie in (0, 1), got {level}")
        if self.lmoment is not None:
            order, eps, target = self.lmoment
            if eps < 0.0:
                raise ParameterError(f"L-moment tolerance must be non-negative, got {eps}")
            if order < 1 or order > 4:
                raise ParameterError(f"L-moment order must be in 1..4, got {order}")
            if len(target) != order:
                raise ParameterError("L-moment target length must equal the order")

    @property
    def has_rows(self) -> bool:
        return bool(self.var_constraints or self.cvar_constraints or self.lmoment)

    @property
    def trivial(self) -> bool:
        return not (self.nonneg or self.cardinality is not None or self.has_rows)


@dataclass(frozen=True)
class FitResult:
    """Solution of a constrained fit.

    ``objective`` is the rooted weighted error ``(sum_j w_j |r_j|^q)^(1/q)``
    (for a full weight matrix, ``sqrt(r'Wr)``); ``f_n`` is the same quantity
    normalized by the number of levels, the diagnostic that converges to the
    weighted Wasserstein distance as the sample grows.
    """

    theta: np.ndarray
    objective: float
    f_n: float
    residuals: np.ndarray
    active_support: tuple[int, ...]
    error_norm: str
    cov_estimate: np.ndarray | None = None
    optimal: bool = True
    penalty: float = 0.0


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _weighted_design(prob: DesignProblem) -> tuple[np.ndarray, np.ndarray]:
    """Return (A, b) with A = W^(1/2) X and b = W^(1/2) y."""
    if prob.weights.is_diagonal:
        sw = np.sqrt(prob.weight_diagonal)
        return prob.X * sw[:, None], prob.y * sw
    w_mat = prob.weight_matrix
    try:
        chol = np.linalg.cholesky(w_mat)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(w_mat)
        chol = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return chol.T @ prob.X, chol.T @ prob.y


def _result(
    prob: DesignProblem,
    theta: np.ndarray,
    error_norm: str,
    cov: np.ndarray | None = None,
    optimal: bool = True,
    penalty: float = 0.0,
) -> FitResult:
    resid = prob.y - prob.X @ theta
    q = 2.0 if error_norm == "l2" else 1.0
    if prob.weights.is_diagonal:
        total = float(np.sum(prob.weight_diagonal * np.abs(resid) ** q))
    else:
        total = float(resid @ prob.weight_matrix @ resid)
    total = max(total, 0.0)
    support = tuple(i for i in range(1, len(theta)) if abs(theta[i]) > NONZERO_TOL)
    return FitResult(
        theta=theta,
        objective=total ** (1.0 / q),
        f_n=(total / len(prob.y)) ** (1.0 / q),
        residuals=resid,
        active_support=support,
        error_norm=error_norm,
        cov_estimate=cov,
        optimal=optimal,
        penalty=penalty,
    )


def _unrooted_objective(prob: DesignProblem, theta: np.ndarray, error_norm: str) -> float:
    resid = prob.y - prob.X @ theta
    q = 2.0 if error_norm == "l2" else 1.0
    if prob.weights.is_diagonal:
        return float(np.sum(prob.weight_diagonal * np.abs(resid) ** q))
    return float(resid @ prob.weight_matrix @ resid)


def _constraint_rows(
    catalog: Sequence[BasisFunction], cons: ConstraintSet
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """VaR/CVaR/L-moment rows as (A_ub, b_ub, A_eq, b_eq) on theta.

    Inequalities use the ``A x <= b`` convention.  An L-moment block with
    eps > 0 is expanded into its 2^m sign inequalities (equivalent to the
    auxiliary-variable system, but without extra variables); eps == 0
    becomes equality rows.
    """
    n = len(catalog)
    a_ub: list[np.ndarray] = []
    b_ub: list[float] = []
    a_eq: list[np.ndarray] = []
    b_eq: list[float] = []
    for level, bound, direction in cons.var_constraints:
        row = np.array([b(level) for b in catalog])
        sign = 1.0 if direction == "le" else -1.0
        a_ub.append(sign * row)
        b_ub.append(sign * bound)
    for level, bound, direction in cons.cvar_constraints:
        row = np.array([cvar_coefficients(b, level) for b in catalog])
        sign = 1.0 if direction == "le" else -1.0
        a_ub.append(sign * row)
        b_ub.append(sign * bound)
    if cons.lmoment is not None:
        order, eps, target = cons.lmoment
        rows = lmoment_constraint_rows(catalog, order, target, eps)
        if eps == 0.0:
            a_eq.extend(rows.matrix)
            b_eq.extend(rows.target)
        else:
            for signs in itertools.product((-1.0, 1.0), repeat=order):
                s = np.asarray(signs)
                a_ub.append(s @ rows.matrix)
                b_ub.append(eps + float(s @ rows.target))
    a_ub_arr = np.array(a_ub) if a_ub else np.empty((0, n))
    a_eq_arr = np.array(a_eq) if a_eq else np.empty((0, n))
    return a_ub_arr, np.array(b_ub, dtype=float), a_eq_arr, np.array(b_eq, dtype=float)


def _feasible_start(
    n: int,
    nonneg: bool,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
) -> np.ndarray:
    """A feasible point for the QP path (phase-1 LP when rows are present)."""
    if len(b_ub) == 0 and len(b_eq) == 0:
        return np.zeros(n)
    free = np.ones(n, dtype=bool)
    if nonneg:
        free[1:] = False
    x, _ = solve_lp(
        np.zeros(n),
        a_ub=a_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        a_eq=a_eq if len(b_eq) else None,
        b_eq=b_eq if len(b_eq) else None,
        free_mask=free,
    )
    return x


def _verify_qp_kkt(
    h_mat: np.ndarray,
    c_vec: np.ndarray,
    theta: np.ndarray,
    nonneg: bool,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
) -> None:
    """Certify stationarity of the weighted squared error at the exit point."""
    grad = 2.0 * (h_mat @ theta - c_vec)
    tol = max(1e-8, 1e-12 * float(np.max(np.abs(c_vec), initial=1.0)))
    scale = max(1.0, float(np.max(np.abs(theta))))
    rows: list[np.ndarray] = []
    if nonneg:
        for i in np.flatnonzero(theta[1:] <= NONZERO_TOL * scale) + 1:
            row = np.zeros(len(theta))
            row[i] = 1.0
            rows.append(row)
    if len(b_ub):
        slack = a_ub @ theta - b_ub
        b_scale = max(1.0, float(np.max(np.abs(b_ub), initial=1.0)))
        for jj in np.flatnonzero(np.abs(slack) <= 1e-8 * b_scale):
            rows.append(-a_ub[jj])
    if len(b_eq):
        rows.extend(a_eq)
        rows.extend(-a_eq)
    if not rows:
        if float(np.max(np.abs(grad), initial=0.0)) > tol:
            raise SolverError("unconstrained stationarity violated at solver exit")
        return
    c_mat = np.array(rows)
    lam, *_ = np.linalg.lstsq(c_mat.T, grad, rcond=None)
    resid = c_mat.T @ lam - grad
    if float(np.max(np.abs(resid), initial=0.0)) > max(tol, 1e-6 * float(np.max(np.abs(grad), initial=1.0))):
        raise SolverError("KKT stationarity violated at solver exit")


# ---------------------------------------------------------------------------
# weighted least squares
# ---------------------------------------------------------------------------


def _solve_l2_theta(
    prob: DesignProblem,
    cons: ConstraintSet,
    extra_ub: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """L2 dispatch: closed form / partial NNLS / general active-set QP."""
    a_mat, b_vec = _weighted_design(prob)
    n = a_mat.shape[1]
    h_mat = a_mat.T @ a_mat
    c_vec = a_mat.T @ b_vec
    empty = (np.empty((0, n)), np.empty(0), np.empty((0, n)), np.empty(0))

    if cons.trivial and extra_ub is None:
        sol, _, rank, _ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
        if rank < n:
            raise RankDeficiencyError(
                f"design matrix has rank {rank} < {n}; remove collinear bases"
            )
        _verify_qp_kkt(h_mat, c_vec, sol, False, *empty)
        return sol

    if not cons.has_rows and extra_ub is None:
        mask = np.zeros(n, dtype=bool)
        mask[1:] = True
        theta = partial_nnls(h_mat, c_vec, mask)
        grad = 2.0 * (h_mat @ theta - c_vec)
        tol = max(1e-8, 1e-12 * float(np.max(np.abs(c_vec), initial=1.0)))
        on_bound = (theta <= NONZERO_TOL) & mask
        if float(np.max(np.abs(grad[~on_bound]), initial=0.0)) > tol or float(
            np.min(grad[on_bound], initial=0.0)
        ) < -tol:
            raise SolverError("non-negative least squares KKT check failed")
        return theta

    a_ub, b_ub, a_eq, b_eq = _constraint_rows(prob.catalog, cons)
    if extra_ub is not None:
        a_ub = np.vstack([a_ub, extra_ub[0]]) if len(b_ub) else extra_ub[0]
        b_ub = np.concatenate([b_ub, extra_ub[1]]) if len(b_ub) else extra_ub[1]
    x0 = _feasible_start(n, cons.nonneg, a_ub, b_ub, a_eq, b_eq)
    ineq_rows = [-a_ub] if len(b_ub) else []
    ineq_rhs = [-b_ub] if len(b_ub) else []
    if cons.nonneg:
        bound_rows = np.zeros((n - 1, n))
        bound_rows[:, 1:] = np.eye(n - 1)
        ineq_rows.append(bound_rows)
        ineq_rhs.append(np.zeros(n - 1))
    theta = active_set_qp(
        h_mat,
        c_vec,
        x0,
        a_ineq=np.vstack(ineq_rows) if ineq_rows else None,
        b_ineq=np.concatenate(ineq_rhs) if ineq_rhs else None,
        a_eq=a_eq if len(b_eq) else None,
        b_eq=b_eq if len(b_eq) else None,
    )
    _verify_qp_kkt(h_mat, c_vec, theta, cons.nonneg, a_ub, b_ub, a_eq, b_eq)
    return theta


def fit_wls(
    prob: DesignProblem,
    cons: ConstraintSet | None = None,
    compute_cov: bool = False,
) -> FitResult:
    """Weighted least squares fit under the constraint set.

    Without constraints this is the closed form ``(X'WX)^-1 X'W y``.  With
    only non-negativity, an active-set iteration whose KKT conditions
    (gradient >= -1e-8 on the active bounds, |gradient| <= 1e-8 on the free
    set) are certified at exit.  Tail and L-moment rows run through a
    general active-set QP.  ``compute_cov`` attaches the plug-in sandwich
    matrix H/N as ``cov_estimate``.
    """
    cons = cons or ConstraintSet()
    if cons.cardinality is not None:
        return fit_cardinality(prob, cons, error="l2")
    theta = _solve_l2_theta(prob, cons)
    cov = _plugin_cov(prob) if compute_cov else None
    return _result(prob, theta, "l2", cov=cov)


def _plugin_cov(prob: DesignProblem) -> np.ndarray:
    """Feasible-GLS standard-error matrix H/N with a normal plug-in density."""
    x = ndtri(prob.p)
    dens = np.exp(-0.5 * x * x) / _SQRT_2PI
    cov = order_stat_covariance(prob.p, dens)
    h_mat = asymptotic_covariance(prob, cov)
    return h_mat / prob.n_obs


# ---------------------------------------------------------------------------
# least absolute deviation (linear programming)
# ---------------------------------------------------------------------------


def _lad_lp_arrays(prob: DesignProblem, cons: ConstraintSet, lam: float):
    """Split-variable LP for weighted LAD with optional L1 penalty.

    Variables are [theta, e+, e-] plus, when an L-moment block with eps > 0
    is present, its auxiliary variables u (the literal linear system rather
    than the 2^m expansion used on the QP path).
    """
    if not prob.weights.is_diagonal:
        raise ParameterError("full weight matrices are only supported for the L2 error")
    w = prob.weight_diagonal
    x_mat, y = prob.X, prob.y
    j, n = x_mat.shape

    lm_aux = cons.lmoment is not None and cons.lmoment[1] > 0.0
    rows_cons = replace(cons, lmoment=None) if lm_aux else cons
    a_ub_t, b_ub_t, a_eq_t, b_eq_t = _constraint_rows(prob.catalog, rows_cons)
    n_aux = cons.lmoment[0] if lm_aux else 0

    n_var = n + 2 * j + n_aux
    c = np.zeros(n_var)
    if lam:
        c[1:n] = lam
    c[n : n + 2 * j] = np.concatenate([w, w]) / j

    a_eq = np.zeros((j + len(b_eq_t), n_var))
    a_eq[:j, :n] = x_mat
    a_eq[:j, n : n + j] = np.eye(j)
    a_eq[:j, n + j : n + 2 * j] = -np.eye(j)
    if len(b_eq_t):
        a_eq[j:, :n] = a_eq_t
    b_eq = np.concatenate([y, b_eq_t])

    ub_rows: list[np.ndarray] = []
    ub_rhs: list[float] = []
    for row, rhs in zip(a_ub_t, b_ub_t):
        full = np.zeros(n_var)
        full[:n] = row
        ub_rows.append(full)
        ub_rhs.append(rhs)
    if lm_aux:
        order, eps, target = cons.lmoment
        rows = lmoment_constraint_rows(prob.catalog, order, target, eps)
        aux_a, aux_b = rows.aux_system()
        for arow, rhs in zip(aux_a, aux_b):
            full = np.zeros(n_var)
            full[:n] = arow[:n]
            full[n + 2 * j :] = arow[n:]
            ub_rows.append(full)
            ub_rhs.append(rhs)
    a_ub = np.array(ub_rows) if ub_rows else np.empty((0, n_var))
    b_ub = np.array(ub_rhs, dtype=float)

    free = np.zeros(n_var, dtype=bool)
    free[0] = True
    if not cons.nonneg:
        free[1:n] = True
    return c, a_ub, b_ub, a_eq, b_eq, free, n


def _lad_highs(
    prob: DesignProblem,
    cons: ConstraintSet,
    lam: float,
    extra: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Sparse assembly of the LAD LP for scipy's HiGHS backend."""
    if not prob.weights.is_diagonal:
        raise ParameterError("full weight matrices are only supported for the L2 error")
    w = prob.weight_diagonal
    x_mat, y = prob.X, prob.y
    j, n = x_mat.shape
    lm_aux = cons.lmoment is not None and cons.lmoment[1] > 0.0
    rows_cons = replace(cons, lmoment=None) if lm_aux else cons
    a_ub_t, b_ub_t, a_eq_t, b_eq_t = _constraint_rows(prob.catalog, rows_cons)
    n_aux = cons.lmoment[0] if lm_aux else 0
    n_var = n + 2 * j + n_aux

    c = np.zeros(n_var)
    if lam:
        c[1:n] = lam
    c[n : n + 2 * j] = np.concatenate([w, w]) / j

    eye = sp.identity(j, format="csr")
    blocks = [sp.csr_matrix(x_mat), eye, -eye]
    if n_aux:
        blocks.append(sp.csr_matrix((j, n_aux)))
    a_eq = sp.hstack(blocks, format="csr")
    b_eq = y
    if len(b_eq_t):
        pad = np.zeros((len(b_eq_t), n_var))
        pad[:, :n] = a_eq_t
        a_eq = sp.vstack([a_eq, sp.csr_matrix(pad)], format="csr")
        b_eq = np.concatenate([y, b_eq_t])

    ub_dense: list[np.ndarray] = []
    ub_rhs: list[float] = []
    for row, rhs in zip(a_ub_t, b_ub_t):
        full = np.zeros(n_var)
        full[:n] = row
        ub_dense.append(full)
        ub_rhs.append(rhs)
    if lm_aux:
        order, eps, target = cons.lmoment
        rows = lmoment_constraint_rows(prob.catalog, order, target, eps)
        aux_a, aux_b = rows.aux_system()
        for arow, rhs in zip(aux_a, aux_b):
            full = np.zeros(n_var)
            full[:n] = arow[:n]
            full[n + 2 * j :] = arow[n:]
            ub_dense.append(full)
            ub_rhs.append(rhs)
    if extra is not None:
        for row, rhs in zip(extra[0], extra[1]):
            full = np.zeros(n_var)
            full[:n] = row
            ub_dense.append(full)
            ub_rhs.append(float(rhs))

    bounds = [(0.0, None)] * n_var
    bounds[0] = (None, None)
    if not cons.nonneg:
        for i in range(1, n):
            bounds[i] = (None, None)
    res = linprog(
        c,
        A_ub=sp.csr_matrix(np.array(ub_dense)) if ub_dense else None,
        b_ub=np.array(ub_rhs) if ub_rhs else None,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleError("least absolute deviation constraints are infeasible")
    if res.status == 3:
        raise UnboundedError("least absolute deviation program is unbounded (internal error)")
    if not res.success:
        raise SolverError(f"HiGHS failed: {res.message}")
    return res.x[:n]


def _solve_lad_theta(
    prob: DesignProblem, cons: ConstraintSet, lam: float, backend: str
) -> np.ndarray:
    if backend not in ("auto", "simplex", "highs"):
        raise ParameterError(f"unknown LP backend {backend!r}")
    use_simplex = backend == "simplex" or (backend == "auto" and len(prob.y) <= SIMPLEX_ROW_LIMIT)
    if not use_simplex:
        return _lad_highs(prob, cons, lam)
    c, a_ub, b_ub, a_eq, b_eq, free, n = _lad_lp_arrays(prob, cons, lam)
    x, _ = solve_lp(
        c,
        a_ub=a_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        a_eq=a_eq,
        b_eq=b_eq,
        free_mask=free,
    )
    return x[:n]


def fit_lad(
    prob: DesignProblem,
    cons: ConstraintSet | None = None,
    lam: float = 0.0,
    backend: str = "auto",
) -> FitResult:
    """Weighted least absolute deviation fit via the split-variable LP.

    ``backend='auto'`` uses the built-in dense simplex up to
    ``SIMPLEX_ROW_LIMIT`` levels and HiGHS (scipy) beyond; both solve the
    identical arrays.
    """
    cons = cons or ConstraintSet()
    if cons.cardinality is not None:
        return fit_cardinality(prob, cons, error="l1", backend=backend)
    theta = _solve_lad_theta(prob, cons, lam, backend)
    return _result(prob, theta, "l1", penalty=lam * float(np.sum(theta[1:])) if lam else 0.0)


# ---------------------------------------------------------------------------
# cardinality (branch and bound)
# ---------------------------------------------------------------------------


def fit_cardinality(
    prob: DesignProblem,
    cons: ConstraintSet,
    error: str = "l2",
    node_cap: int = 100_000,
    backend: str = "auto",
) -> FitResult:
    """Globally optimal fit under non-negativity and a support-size bound.

    Best-first branch and bound over inclusion decisions; a node's bound is
    the convex fit with excluded columns removed (plus the variable-bound
    rows of the mixed-integer transform when ``var_bounds`` are supplied),
    which never overestimates.  If the node cap is exceeded the incumbent is
    returned with ``optimal=False``.
    """
    if cons.cardinality is None:
        raise ParameterError("fit_cardinality requires a cardinality bound")
    if error not in ("l1", "l2"):
        raise ParameterError(f"error norm must be 'l1' or 'l2', got {error!r}")
    card = int(cons.cardinality)
    n = prob.X.shape[1]
    base_cons = replace(cons, cardinality=None, nonneg=True, var_bounds=None)
    if card >= n - 1:
        if error == "l2":
            return fit_wls(prob, base_cons)
        return fit_lad(prob, base_cons, backend=backend)

    bounds_arr = None
    if cons.var_bounds is not None:
        if len(cons.var_bounds) != n - 1:
            raise ParameterError("var_bounds must cover every non-intercept coefficient")
        bounds_arr = np.asarray(cons.var_bounds, dtype=float)

    def _bound_rows(keep_idx: list[int], f1: frozenset, budget: bool) -> tuple[np.ndarray, np.ndarray] | None:
        if bounds_arr is None:
            return None
        rows: list[np.ndarray] = []
        rhs: list[float] = []
        lo, hi = bounds_arr[:, 0], bounds_arr[:, 1]
        for i in keep_idx:
            if i == 0:
                continue
            if np.isfinite(hi[i - 1]):
                row = np.zeros(n)
                row[i] = 1.0
                rows.append(row)
                rhs.append(hi[i - 1])
            if i in f1 and lo[i - 1] > 0.0:
                row = np.zeros(n)
                row[i] = -1.0
                rows.append(row)
                rhs.append(-lo[i - 1])
        undecided = [i for i in keep_idx if i != 0 and i not in f1]
        if budget and undecided and np.all(np.isfinite(hi)) and np.all(hi > 0.0):
            row = np.zeros(n)
            for i in undecided:
                row[i] = 1.0 / hi[i - 1]
            rows.append(row)
            rhs.append(float(card - len(f1)))
        if not rows:
            return None
        return np.array(rows), np.array(rhs)

    def _solve_subset(keep_idx: list[int], extra: tuple[np.ndarray, np.ndarray] | None):
        keep = np.zeros(n, dtype=bool)
        keep[keep_idx] = True
        sub = DesignProblem(
            y=prob.y,
            p=prob.p,
            X=prob.X[:, keep],
            weights=prob.weights,
            catalog=tuple(b for i, b in enumerate(prob.catalog) if keep[i]),
            n_obs=prob.n_obs,
        )
        sub_extra = (extra[0][:, keep], extra[1]) if extra is not None else None
        if error == "l2":
            theta_sub = _solve_l2_theta(sub, base_cons, extra_ub=sub_extra)
        else:
            if sub_extra is not None:
                lad_cons = replace(base_cons)
                theta_sub = _solve_lad_theta_with_extra(sub, lad_cons, backend, sub_extra)
            else:
                theta_sub = _solve_lad_theta(sub, base_cons, 0.0, backend)
        theta = np.zeros(n)
        theta[keep] = theta_sub
        return theta, _unrooted_objective(prob, theta, error)

    def relax(f0: frozenset, f1: frozenset):
        keep_idx = [0] + [i for i in range(1, n) if i not in f0]
        return _solve_subset(keep_idx, _bound_rows(keep_idx, f1, budget=True))

    def refit(support: frozenset):
        keep_idx = [0] + sorted(support)
        return _solve_subset(keep_idx, _bound_rows(keep_idx, frozenset(support), budget=False))

    theta, _, optimal = branch_and_bound(
        n, card, relax, refit, node_cap=node_cap, zero_tol=NONZERO_TOL
    )
    return replace(_result(prob, theta, error), optimal=optimal)


def _solve_lad_theta_with_extra(
    prob: DesignProblem, cons: ConstraintSet, backend: str, extra: tuple[np.ndarray, np.ndarray]
) -> np.ndarray:
    """LAD solve with additional inequality rows on theta (bound rows)."""
    use_simplex = backend == "simplex" or (backend == "auto" and len(prob.y) <= SIMPLEX_ROW_LIMIT)
    if not use_simplex:
        return _lad_highs(prob, cons, 0.0, extra=extra)
    c, a_ub, b_ub, a_eq, b_eq, free, n = _lad_lp_arrays(prob, cons, 0.0)
    add_rows = np.zeros((extra[0].shape[0], len(c)))
    add_rows[:, :n] = extra[0]
    a_ub = np.vstack([a_ub, add_rows]) if len(b_ub) else add_rows
    b_ub = np.concatenate([b_ub, extra[1]]) if len(b_ub) else extra[1]
    x, _ = solve_lp(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq, free_mask=free)
    return x[:n]


# ---------------------------------------------------------------------------
# LASSO
# ---------------------------------------------------------------------------


def fit_lasso(
    prob: DesignProblem,
    lam: float,
    error: str = "l2",
    max_sweeps: int = 200_000,
    warm_start: np.ndarray | None = None,
) -> FitResult:
    """Non-negative LASSO: mean error + lam * sum of non-intercept coefficients.

    The L2 error uses cyclic coordinate descent run to stationarity within
    1e-8; the L1 error adds the penalty to the LAD linear program.  The
    intercept is free and never penalized.
    """
    if lam < 0.0:
        raise ParameterError(f"penalty coefficient must be non-negative, got {lam}")
    if error == "l1":
        return fit_lad(prob, ConstraintSet(nonneg=True), lam=lam)
    if error != "l2":
        raise ParameterError(f"error norm must be 'l1' or 'l2', got {error!r}")
    if not prob.weights.is_diagonal:
        raise ParameterError("LASSO supports diagonal weights only")

    x_mat, y = prob.X, prob.y
    j, n = x_mat.shape
    w = prob.weight_diagonal
    wx = x_mat * w[:, None]
    denom = np.einsum("ji,ji->i", wx, x_mat)
    if np.any(denom <= 0.0):
        raise RankDeficiencyError("a basis column has zero weighted norm")
    theta = np.zeros(n) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    resid = y - x_mat @ theta
    half_lam = 0.5 * lam * j

    for _ in range(max_sweeps):
        for i in range(n):
            rho = float(wx[:, i] @ resid) + denom[i] * theta[i]
            new = rho / denom[i] if i == 0 else max(0.0, (rho - half_lam) / denom[i])
            if new != theta[i]:
                resid -= x_mat[:, i] * (new - theta[i])
                theta[i] = new
        grad = -(2.0 / j) * (wx.T @ resid)
        on = theta[1:] > NONZERO_TOL
        kkt_on = float(np.max(np.abs(grad[1:][on] + lam), initial=0.0))
        kkt_off = float(np.min(grad[1:][~on] + lam, initial=0.0))
        if abs(grad[0]) <= 1e-8 and kkt_on <= 1e-8 and kkt_off >= -1e-8:
            break
    else:
        raise IterationLimitError(f"coordinate descent did not converge in {max_sweeps} sweeps")
    return _result(prob, theta, "l2", penalty=lam * float(np.sum(theta[1:])))


def lasso_path_to_cardinality(
    prob: DesignProblem,
    target_card: int,
    step: float,
    error: str = "l2",
) -> tuple[float, FitResult]:
    """Walk lam over {step, 2 step, ...} until the support reaches the target.

    Returns the smallest grid lam whose fit has at most ``target_card``
    non-zero non-intercept coefficients (threshold 1e-8), with that fit.
    """
    if step <= 0.0:
        raise ParameterError(f"path step must be positive, got {step}")
    warm = None
    for k in range(1, 10_001):
        lam = k * step
        fit = fit_lasso(prob, lam, error=error, warm_start=warm)
        warm = fit.theta
        if len(fit.active_support) <= target_card:
            return lam, fit
    raise SolverError(
        f"lasso path reached lam = {10_000 * step:g} without support <= {target_card}"
    )


# ---------------------------------------------------------------------------
# constraint building blocks
# ---------------------------------------------------------------------------


def cvar_coefficients(b: BasisFunction, p: float) -> float:
    """Upper tail average of a basis: (1/(1-p)) * int_p^1 Q(u) du.

    Accepts p = 0 (the full upper partial moment).  Raises
    DivergentIntegralError when the tail integral fails to converge.
    """
    if not 0.0 <= p < 1.0:
        raise DomainError(f"CVaR level must lie in [0, 1), got {p}")
    total = unit_integral(lambda u: np.asarray(b(u), dtype=float), lo=p, hi=1.0, rel_tail_tol=1e-11)
    return float(total / (1.0 - p))


@dataclass(frozen=True)
class LMomentRows:
    """L-moment constraint data: model L-moments equal ``matrix @ theta``.

    The feasible set is ``||matrix @ theta - target||_1 <= eps``; the
    auxiliary-variable form (variables theta then u, all rows <=) is
    produced by ``aux_system``.  With eps = 0 the rows force exact matching.
    """

    matrix: np.ndarray
    target: np.ndarray
    eps: float

    def aux_system(self) -> tuple[np.ndarray, np.ndarray]:
        m, n = self.matrix.shape
        a_rows = np.zeros((2 * m + 1, n + m))
        rhs = np.zeros(2 * m + 1)
        a_rows[:m, :n] = self.matrix
        a_rows[:m, n:] = -np.eye(m)
        rhs[:m] = self.target
        a_rows[m : 2 * m, :n] = -self.matrix
        a_rows[m : 2 * m, n:] = -np.eye(m)
        rhs[m : 2 * m] = -self.target
        a_rows[2 * m, n:] = 1.0
        rhs[2 * m] = self.eps
        return a_rows, rhs


def lmoment_constraint_rows(
    catalog: Sequence[BasisFunction],
    m: int,
    sample_lmoments: Sequence[float],
    eps: float,
) -> LMomentRows:
    """Linear rows bounding the L1 error of model L-moments of orders 1..m."""
    if m < 1 or m > 4:
        raise ParameterError(f"L-moment order must be in 1..4, got {m}")
    if eps < 0.0:
        raise ParameterError(f"tolerance must be non-negative, got {eps}")
    target = np.asarray(sample_lmoments, dtype=float)
    if target.size < m:
        raise ParameterError("sample L-moment vector shorter than the requested order")
    mat = np.zeros((m, len(catalog)))
    for i, b in enumerate(catalog):
        for k in range(1, m + 1):
            if b.kind == "constant":
                mat[k - 1, i] = 1.0 if k == 1 else 0.0
            else:
                mat[k - 1, i] = _metrics.lmoment_of_basis(b, k)
    return LMomentRows(matrix=mat, target=target[:m], eps=eps)


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------


def asymptotic_covariance(
    prob: DesignProblem | np.ndarray,
    order_cov: np.ndarray,
    weight: np.ndarray | None = None,
) -> np.ndarray:
    """Sandwich covariance of the weighted estimator.

    H = (X'WX)^-1 X'W C W'X (X'W'X)^-1; with W = C^-1 this collapses to
    (X'C^-1 X)^-1, the best-linear-unbiased choice.
    """
    x_mat = prob.X if isinstance(prob, DesignProblem) else np.asarray(prob, dtype=float)
    c_mat = np.asarray(order_cov, dtype=float)
    if weight is None:
        if not isinstance(prob, DesignProblem):
            raise ParameterError("weight matrix required when passing a bare design matrix")
        w_mat = prob.weight_matrix
    else:
        w_mat = np.asarray(weight, dtype=float)
        if w_mat.ndim == 1:
            w_mat = np.diag(w_mat)
    xtwx = x_mat.T @ w_mat @ x_mat
    try:
        gain = np.linalg.solve(xtwx, x_mat.T @ w_mat)
    except np.linalg.LinAlgError as exc:
        raise SolverError("X'WX is singular") from exc
    h_mat = gain @ c_mat @ gain.T
    return 0.5 * (h_mat + h_mat.T)
