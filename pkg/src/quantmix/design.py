"""Turn a raw sample into a regression problem on order statistics.

The sorted sample is matched with plotting positions p_n = n/(N+1) (or a
tail-adjusted or fixed-level variant), the design matrix is filled with the
standardized basis quantiles at those levels, and a weight specification
resolves to either a diagonal weight vector or a full weight matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .basis import BasisFunction
from .errors import DataError, DomainError, ParameterError, SolverError

__all__ = [
    "PlottingScheme",
    "WeightSpec",
    "DesignProblem",
    "plotting_positions",
    "plugin_normal_weights",
    "order_stat_covariance",
    "build_problem",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PlottingScheme:
    """How probability levels are assigned to order statistics.

    kind
        ``standard``: p_n = n/(N+1).
        ``shrunk``: standard, except levels in the lower tail band use
        (n-0.5)/(N+1) and levels in the upper band use (n+0.5)/(N+1).
        ``fixed-levels``: the supplied ``levels`` are used as-is and the
        sample is reduced to the matching order statistics (J < N case).
    shrink_band
        Fraction of probability at each end treated as the tail band
        (``shrunk`` only).
    """

    kind: str = "standard"
    shrink_band: float = 0.01
    levels: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("standard", "shrunk", "fixed-levels"):
            raise ParameterError(f"unknown plotting scheme kind {self.kind!r}")
        if self.kind == "shrunk" and not 0.0 < self.shrink_band < 0.5:
            raise ParameterError("shrink_band must lie in (0, 0.5)")
        if self.kind == "fixed-levels":
            if not self.levels:
                raise ParameterError("fixed-levels scheme requires explicit levels")
            lv = np.asarray(self.levels, dtype=float)
            if np.any(lv <= 0.0) or np.any(lv >= 1.0) or np.any(np.diff(lv) <= 0.0):
                raise DomainError("levels must be strictly increasing inside (0, 1)")


def plotting_positions(n_obs: int, scheme: PlottingScheme = PlottingScheme()) -> np.ndarray:
    """Probability levels attached to the order statistics of ``n_obs`` points."""
    if scheme.kind == "fixed-levels":
        return np.asarray(scheme.levels, dtype=float)
    if n_obs < 2:
        raise DataError(f"need at least 2 observations, got {n_obs}")
    n = np.arange(1, n_obs + 1, dtype=float)
    p = n / (n_obs + 1.0)
    if scheme.kind == "shrunk":
        lower = p < scheme.shrink_band
        upper = p > 1.0 - scheme.shrink_band
        p = np.where(lower, (n - 0.5) / (n_obs + 1.0), p)
        p = np.where(upper, (n + 0.5) / (n_obs + 1.0), p)
    return p


def plugin_normal_weights(p: Sequence[float]) -> np.ndarray:
    """Reciprocal asymptotic order-statistic variances under a normal plug-in.

    w = phi(Phi^-1(p))^2 / (p (1-p)), which downweights tail levels.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("weight levels must lie strictly inside (0, 1)")
    x = ndtri(arr)
    dens = np.exp(-0.5 * x * x) / _SQRT_2PI
    return dens * dens / (arr * (1.0 - arr))


def order_stat_covariance(p: Sequence[float], density_at_quantiles: Sequence[float]) -> np.ndarray:
    """Asymptotic covariance of sample quantiles at levels ``p``.

    c_ij = p_i (1 - p_j) / (f_i f_j) for i <= j, completed symmetrically,
    where f is the true density at the corresponding quantile.
    """
    arr = np.asarray(p, dtype=float)
    f = np.asarray(density_at_quantiles, dtype=float)
    if arr.shape != f.shape:
        raise ParameterError("levels and densities must have matching shapes")
    if np.any(f <= 0.0):
        raise ParameterError("densities at quantiles must be strictly positive")
    if np.any(np.diff(arr) <= 0.0):
        raise ParameterError("levels must be strictly increasing")
    pi = arr[:, None]
    pj = arr[None, :]
    upper = np.minimum(pi, pj) * (1.0 - np.maximum(pi, pj))
    return upper / (f[:, None] * f[None, :])


@dataclass(frozen=True)
class WeightSpec:
    """Weight specification for the regression.

    kind
        ``equal``: unit weights.
        ``diagonal-plugin-normal``: plugin_normal_weights at the levels.
        ``full-optimal-plugin``: the inverse of the order-statistic covariance
        built with normal plug-in densities (feasible generalized least
        squares).
        ``explicit``: user-supplied diagonal vector or full matrix.
    """

    kind: str = "equal"
    diagonal: tuple[float, ...] | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("equal", "diagonal-plugin-normal", "full-optimal-plugin", "explicit"):
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        if self.kind == "explicit" and self.diagonal is None and self.matrix is None:
            raise ParameterError("explicit weights need a diagonal or a matrix")

    @property
    def is_diagonal(self) -> bool:
        return self.kind in ("equal", "diagonal-plugin-normal") or (
            self.kind == "explicit" and self.matrix is None
        )

    def resolve_diagonal(self, p: np.ndarray) -> np.ndarray:
        """Diagonal weight vector at levels ``p`` (diagonal kinds only)."""
        if self.kind == "equal":
            return np.ones(len(p))
        if self.kind == "diagonal-plugin-normal":
            return plugin_normal_weights(p)
        if self.kind == "explicit" and self.matrix is None:
            w = np.asarray(self.diagonal, dtype=float)
            if w.shape != np.shape(p):
                raise ParameterError("explicit diagonal weight length mismatch")
            if np.any(w < 0.0):
                raise ParameterError("weights must be non-negative")
            return w
        raise ParameterError(f"{self.kind} weights are not diagonal")

    def resolve_matrix(self, p: np.ndarray) -> np.ndarray:
        """Full weight matrix at levels ``p``."""
        if self.is_diagonal:
            return np.diag(self.resolve_diagonal(p))
        if self.kind == "explicit":
            w = np.asarray(self.matrix, dtype=float)
            if w.shape != (len(p), len(p)):
                raise ParameterError("explicit weight matrix shape mismatch")
            if not np.allclose(w, w.T, atol=1e-10):
                raise ParameterError("weight matrix must be symmetric")
            return w
        # full-optimal-plugin: invert the plug-in covariance via Cholesky,
        # adding a tiny jitter when the factorization fails.
        x = ndtri(p)
        dens = np.exp(-0.5 * x * x) / _SQRT_2PI
        cov = order_stat_covariance(p, dens)
        jitter = 0.0
        for _ in range(3):
            try:
                chol = np.linalg.cholesky(cov + jitter * np.eye(len(p)))
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 10.0, 1e-12 * np.trace(cov) / len(p))
        else:
            raise SolverError("plug-in covariance is numerically indefinite")
        ident = np.eye(len(p))
        inv = np.linalg.solve(chol.T, np.linalg.solve(chol, ident))
        return 0.5 * (inv + inv.T)


@dataclass(frozen=True)
class DesignProblem:
    """Sorted sample quantiles, their levels, design matrix, and weights."""

    y: np.ndarray
    p: np.ndarray
    X: np.ndarray
    weights: WeightSpec
    catalog: tuple[BasisFunction, ...]
    n_obs: int

    @property
    def weight_diagonal(self) -> np.ndarray:
        return self.weights.resolve_diagonal(self.p)

    @property
    def weight_matrix(self) -> np.ndarray:
        return self.weights.resolve_matrix(self.p)


def build_problem(
    sample: Sequence[float],
    catalog: Sequence[BasisFunction],
    scheme: PlottingScheme = PlottingScheme(),
    weights: WeightSpec = WeightSpec(),
) -> DesignProblem:
    """Assemble the regression problem for a sample and a basis catalog.

    With the standard and shrunk schemes, every order statistic is used
    (J = N).  With fixed levels, the sample is reduced to the order
    statistics at indices ceil(p_j (N+1)) clamped to [1, N].
    """
    y = np.asarray(sample, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise DataError("sample must be a non-empty 1-d array")
    if not np.all(np.isfinite(y)):
        raise DataError("sample contains non-finite values")
    if not catalog:
        raise ParameterError("catalog is empty")
    if catalog[0].kind != "constant":
        raise ParameterError("catalog must start with the constant basis")
    n_obs = y.size
    y = np.sort(y)
    p = plotting_positions(n_obs, scheme)
    if scheme.kind == "fixed-levels":
        idx = np.ceil(p * (n_obs + 1.0)).astype(int)
        idx = np.clip(idx, 1, n_obs)
        y = y[idx - 1]
    cols = [b(p) for b in catalog]
    x_mat = np.column_stack(cols)
    return DesignProblem(
        y=y, p=p, X=x_mat, weights=weights, catalog=tuple(catalog), n_obs=n_obs
    )
