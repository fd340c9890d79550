"""Fitted mixture quantile model: evaluation, inversion, density, sampling.

A fitted model is a catalog of basis quantile functions plus a coefficient
vector.  With non-negative coefficients on the non-constant members the
mixture is itself a valid quantile function; its generalized inverse acts as
the CDF and the reciprocal of its derivative as the density.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import BasisFunction, restore_basis
from .errors import (
    DegenerateModelError,
    DomainError,
    ParameterError,
    UnboundedDensityError,
)

__all__ = ["FittedModel"]

P_MIN = 1e-12
P_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class FittedModel:
    """Mixture quantile function ``G(p) = sum_i theta_i Q_i(p)``."""

    catalog: tuple[BasisFunction, ...]
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "catalog", tuple(self.catalog))
        if len(self.catalog) != theta.size:
            raise ParameterError(
                f"catalog size {len(self.catalog)} does not match theta size {theta.size}"
            )
        if not np.all(np.isfinite(theta)):
            raise ParameterError("theta contains non-finite entries")

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, p):
        """Quantile of the mixture at probability level(s) ``p``."""
        arr = np.atleast_1d(np.asarray(p, dtype=float))
        if arr.size and (np.min(arr) <= 0.0 or np.max(arr) >= 1.0):
            raise DomainError("probability levels must lie strictly inside (0, 1)")
        total = np.zeros_like(arr)
        for coef, b in zip(self.theta, self.catalog):
            if coef != 0.0:
                total += coef * b(arr)
        return float(total[0]) if np.ndim(p) == 0 else total

    __call__ = evaluate

    def derivative(self, p):
        """Derivative of the quantile function (quantile density) at ``p``."""
        arr = np.atleast_1d(np.asarray(p, dtype=float))
        total = np.zeros_like(arr)
        for coef, b in zip(self.theta, self.catalog):
            if coef != 0.0:
                total += coef * b.qdf(arr)
        return float(total[0]) if np.ndim(p) == 0 else total

    @property
    def is_degenerate(self) -> bool:
        return bool(np.all(np.abs(self.theta[1:]) <= 1e-14))

    # -- inversion ----------------------------------------------------------

    def inverse(self, x):
        """Generalized inverse: the smallest ``p`` with ``G(p) >= x``.

        Vectorized bisection to a bracket below 1e-14, then a Newton polish
        clamped to the bracket.  Values outside the attainable range clamp to
        the open-interval endpoints (1e-12, 1 - 1e-12).
        """
        if self.is_degenerate:
            raise DegenerateModelError("constant model has no usable inverse")
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        g_lo = self.evaluate(P_MIN)
        g_hi = self.evaluate(P_MAX)
        out = np.empty(xs.shape)
        below = xs <= g_lo
        above = xs >= g_hi
        out[below] = P_MIN
        out[above] = P_MAX
        active = ~(below | above)
        if active.any():
            target = xs[active]
            lo = np.full(target.shape, P_MIN)
            hi = np.full(target.shape, P_MAX)
            for _ in range(47):
                mid = 0.5 * (lo + hi)
                ge = self.evaluate(mid) >= target
                hi = np.where(ge, mid, hi)
                lo = np.where(ge, lo, mid)
            p = hi
            for _ in range(2):
                deriv = self.derivative(p)
                good = np.isfinite(deriv) & (deriv > 0.0)
                step = np.where(good, (self.evaluate(p) - target) / np.where(good, deriv, 1.0), 0.0)
                p = np.clip(p - step, lo, hi)
            out[active] = p
        return float(out[0]) if np.ndim(x) == 0 else out

    # -- density ------------------------------------------------------------

    def density(self, x):
        """Density at ``x``: reciprocal slope of the quantile function.

        Raises
        ------
        UnboundedDensityError
            If the quantile function is flat at the inverse point.
        """
        if np.ndim(x) != 0:
            return np.array([self.density(float(v)) for v in np.asarray(x, dtype=float)])
        p = self.inverse(float(x))
        deriv = self.derivative(p)
        if not np.isfinite(deriv):
            h = 1e-6 * max(p * (1.0 - p), 1e-6)
            h = min(h, 0.5 * min(p - 0.0, 1.0 - p))
            deriv = (self.evaluate(min(p + h, P_MAX)) - self.evaluate(max(p - h, P_MIN))) / (
                2.0 * h
            )
        if deriv <= 0.0 or not np.isfinite(deriv):
            raise UnboundedDensityError(f"quantile function is flat at p={p:g}; density unbounded")
        return 1.0 / deriv

    # -- sampling -----------------------------------------------------------

    def sample(self, n: int, seed) -> np.ndarray:
        """Inverse-transform sample of size ``n`` from a seeded generator.

        ``seed`` may be an int or a ``numpy.random.Generator``.
        """
        if n < 1:
            raise ParameterError(f"sample size must be at least 1, got {n}")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        u = rng.uniform(0.0, 1.0, size=n)
        u = np.clip(u, P_MIN, P_MAX)
        return self.evaluate(u)

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        """Serialize to a JSON text document; round-trips bit-exactly."""
        bad = [b.kind for b in self.catalog if not b.is_serializable]
        if bad:
            raise ParameterError("model contains non-serializable custom bases")
        doc = {
            "bases": [
                {
                    "kind": b.kind,
                    "params": list(b.params),
                    "tail_type": b.tail_type,
                    "shift": b.shift,
                    "scale": b.scale,
                }
                for b in self.catalog
            ],
            "theta": [float(v) for v in self.theta],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FittedModel":
        doc = json.loads(text)
        catalog = [
            restore_basis(
                entry["kind"],
                entry["params"],
                entry["tail_type"],
                entry["shift"],
                entry["scale"],
            )
            for entry in doc["bases"]
        ]
        return cls(catalog=tuple(catalog), theta=np.asarray(doc["theta"], dtype=float))
