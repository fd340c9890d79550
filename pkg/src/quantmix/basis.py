"""Basis quantile functions: construction, standardization, catalogs.

Every basis is a non-decreasing function on the open unit interval.  Families
are standardized so that mixtures are scale-comparable:

* two-tailed families: zero median and unit interquartile range,
* one-tailed families: zero lower endpoint (evaluated at ``p = 1e-12``) and
  unit interquartile range.

The constant basis (identically 1) carries the location coefficient of a
mixture and is never standardized or filtered.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import betaincinv, ndtri, stdtrit
from scipy.stats import t as _student_t

from .errors import CatalogError, DomainError, ParameterError, StandardizationError

__all__ = [
    "BasisFunction",
    "constant_basis",
    "eval_basis",
    "make_normal",
    "make_exponential",
    "make_student_t",
    "make_skewed_t",
    "make_gb2",
    "make_ispline_basis",
    "make_custom",
    "make_catalog",
    "catalog_rows",
    "restore_basis",
]

TWO_TAILED = "two-tailed"
ONE_TAILED = "one-tailed"
ZERO_QUANTILE_P = 1e-12
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _as_prob_array(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.size and (np.min(arr) <= 0.0 or np.max(arr) >= 1.0 or not np.all(np.isfinite(arr))):
        raise DomainError("probability levels must lie strictly inside (0, 1)")
    return arr, scalar


class BasisFunction:
    """A standardized, immutable basis quantile function.

    Instances are callable: ``b(p)`` returns the standardized quantile at
    probability ``p`` (scalar or ndarray).  ``raw(p)`` is the family quantile
    before the affine standardization ``(raw(p) - shift) / scale``.
    """

    def __init__(
        self,
        kind: str,
        params: tuple[float, ...],
        tail_type: str,
        raw_fn: Callable[[np.ndarray], np.ndarray],
        raw_qdf: Callable[[np.ndarray], np.ndarray] | None = None,
        shift: float | None = None,
        scale: float | None = None,
        standardize: bool = True,
    ):
        if tail_type not in (TWO_TAILED, ONE_TAILED):
            raise ParameterError(f"unknown tail type {tail_type!r}")
        self.kind = kind
        self.params = tuple(float(v) for v in params)
        self.tail_type = tail_type
        self._raw_fn = raw_fn
        self._raw_qdf = raw_qdf
        if shift is not None and scale is not None:
            self.shift = float(shift)
            self.scale = float(scale)
        elif standardize:
            self.shift, self.scale = self._standardization()
        else:
            self.shift, self.scale = 0.0, 1.0
        if not (self.scale > 0.0 and np.isfinite(self.scale) and np.isfinite(self.shift)):
            raise StandardizationError(
                f"{kind} basis with params {self.params} has degenerate "
                f"standardization (shift={self.shift}, scale={self.scale})"
            )

    def _standardization(self) -> tuple[float, float]:
        q = self._raw_fn(np.array([0.25, 0.5, 0.75, ZERO_QUANTILE_P]))
        iqr = float(q[2] - q[0])
        if not np.isfinite(iqr) or iqr <= 1e-300:
            raise StandardizationError(
                f"{self.kind} basis with params {self.params} has zero or "
                "non-finite interquartile range; cannot standardize"
            )
        shift = float(q[1]) if self.tail_type == TWO_TAILED else float(q[3])
        return shift, iqr

    def __call__(self, p):
        arr, scalar = _as_prob_array(p)
        out = (self._raw_fn(arr) - self.shift) / self.scale
        return float(out[0]) if scalar else out

    def raw(self, p):
        arr, scalar = _as_prob_array(p)
        out = self._raw_fn(arr)
        return float(out[0]) if scalar else out

    def qdf(self, p):
        """Derivative of the standardized quantile function at ``p``.

        Falls back to a central finite difference when the family has no
        analytic quantile density.
        """
        arr, scalar = _as_prob_array(p)
        if self._raw_qdf is not None:
            out = self._raw_qdf(arr) / self.scale
        else:
            h = 1e-6 * np.maximum(arr * (1.0 - arr), 1e-6)
            h = np.minimum(h, 0.5 * np.minimum(arr, 1.0 - arr))
            out = (self._raw_fn(arr + h) - self._raw_fn(arr - h)) / (2.0 * h * self.scale)
        return float(out[0]) if scalar else out

    @property
    def is_serializable(self) -> bool:
        return self.kind != "custom"

    def __repr__(self) -> str:
        par = ", ".join(repr(v) for v in self.params)
        return f"BasisFunction({self.kind}[{par}], {self.tail_type}, shift={self.shift!r}, scale={self.scale!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BasisFunction):
            return NotImplemented
        if self.kind == "custom" or other.kind == "custom":
            return self is other
        return (
            self.kind == other.kind
            and self.params == other.params
            and self.tail_type == other.tail_type
            and self.shift == other.shift
            and self.scale == other.scale
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.params, self.tail_type, self.shift, self.scale))


def eval_basis(b: BasisFunction, p):
    """Evaluate a standardized basis quantile function at level(s) ``p``."""
    return b(p)


# ---------------------------------------------------------------------------
# family constructors
# ---------------------------------------------------------------------------


def constant_basis() -> BasisFunction:
    """The intercept basis, identically 1."""
    return BasisFunction(
        "constant",
        (),
        TWO_TAILED,
        raw_fn=lambda p: np.ones_like(p),
        raw_qdf=lambda p: np.zeros_like(p),
        shift=0.0,
        scale=1.0,
    )


def make_normal() -> BasisFunction:
    def qdf(p):
        x = ndtri(p)
        return _SQRT_2PI * np.exp(0.5 * x * x)

    return BasisFunction("normal", (), TWO_TAILED, raw_fn=lambda p: ndtri(p), raw_qdf=qdf)


def make_exponential() -> BasisFunction:
    return BasisFunction(
        "exponential",
        (),
        ONE_TAILED,
        raw_fn=lambda p: -np.log1p(-p),
        raw_qdf=lambda p: 1.0 / (1.0 - p),
    )


def make_student_t(nu: float) -> BasisFunction:
    if not nu > 0.0:
        raise ParameterError(f"student-t degrees of freedom must be positive, got {nu}")

    def qdf(p):
        return 1.0 / _student_t.pdf(stdtrit(nu, p), nu)

    return BasisFunction(
        "student_t", (nu,), TWO_TAILED, raw_fn=lambda p: stdtrit(nu, p), raw_qdf=qdf
    )


def make_skewed_t(gamma: float, nu: float) -> BasisFunction:
    """Skewness-scaled t quantile: the two halves of the symmetric t quantile
    are scaled by ``1/gamma`` and ``gamma``, then normalized to unit
    interquartile range.  The median stays at zero.
    """
    if not gamma > 0.0:
        raise ParameterError(f"skewed-t gamma must be positive, got {gamma}")
    if not nu > 0.0:
        raise ParameterError(f"skewed-t degrees of freedom must be positive, got {nu}")
    norm = (gamma + 1.0 / gamma) * float(stdtrit(nu, 0.75))

    def raw(p):
        q = stdtrit(nu, p)
        factor = np.where(p <= 0.5, 1.0 / (gamma * norm), gamma / norm)
        return factor * q

    def qdf(p):
        factor = np.where(p <= 0.5, 1.0 / (gamma * norm), gamma / norm)
        return factor / _student_t.pdf(stdtrit(nu, p), nu)

    return BasisFunction("skewed_t", (gamma, nu), TWO_TAILED, raw_fn=raw, raw_qdf=qdf)


def make_gb2(theta1: float, theta2: float, theta3: float, theta4: float) -> BasisFunction:
    """Generalized beta (second kind) quantile via the beta-variable transform.

    With ``z`` the inverse regularized incomplete beta of ``p`` at
    ``(theta3, theta4)``, the raw quantile is
    ``theta2 * (z / (1 - z)) ** (1 / theta1)``.
    """
    if not (theta2 > 0.0 and theta3 > 0.0 and theta4 > 0.0):
        raise ParameterError(
            f"gb2 parameters theta2..theta4 must be positive, got {(theta2, theta3, theta4)}"
        )
    if not theta1 > 0.0:
        # theta1 < 0 flips the beta transform into a decreasing function,
        # which is not a quantile function.
        raise ParameterError(f"gb2 theta1 must be positive, got {theta1}")

    def raw(p):
        z = betaincinv(theta3, theta4, p)
        z = np.clip(z, 0.0, 1.0 - 1e-16)
        return theta2 * (z / (1.0 - z)) ** (1.0 / theta1)

    def qdf(p):
        z = betaincinv(theta3, theta4, p)
        z = np.clip(z, 1e-300, 1.0 - 1e-16)
        log_beta_pdf = (
            (theta3 - 1.0) * np.log(z)
            + (theta4 - 1.0) * np.log1p(-z)
            - (math.lgamma(theta3) + math.lgamma(theta4) - math.lgamma(theta3 + theta4))
        )
        dq_dz = (
            theta2
            / theta1
            * (z / (1.0 - z)) ** (1.0 / theta1 - 1.0)
            / (1.0 - z) ** 2
        )
        return dq_dz * np.exp(-log_beta_pdf)

    return BasisFunction("gb2", (theta1, theta2, theta3, theta4), ONE_TAILED, raw_fn=raw, raw_qdf=qdf)


def _ispline_knot_vector(degree: int, knots: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [np.full(degree + 1, knots[0]), knots[1:-1], np.full(degree + 1, knots[-1])]
    )


def make_ispline_basis(degree: int, knots: Sequence[float]) -> list[BasisFunction]:
    """Monotone I-spline basis members on [0, 1].

    Each member is an integrated M-spline: non-decreasing, 0 at ``p = 0`` and
    1 at ``p = 1`` before standardization.  Returns ``degree + L`` members,
    where ``L`` is the number of interior knots.
    """
    if degree not in (2, 3):
        raise ParameterError(f"ispline degree must be 2 or 3, got {degree}")
    kn = np.asarray(knots, dtype=float)
    if kn.ndim != 1 or kn.size < 2 or not np.all(np.diff(kn) > 0.0):
        raise ParameterError("ispline knots must be a strictly increasing vector")
    if kn[0] != 0.0 or kn[-1] != 1.0:
        raise ParameterError("ispline knots must span [0, 1] (first 0, last 1)")
    tvec = _ispline_knot_vector(degree, kn)
    n = len(tvec) - degree - 1
    members = []
    for i in range(1, n):
        coef = np.zeros(n)
        coef[i:] = 1.0
        spline = BSpline(tvec, coef, degree, extrapolate=False)
        deriv = spline.derivative()
        members.append(
            BasisFunction(
                "ispline",
                (float(degree), float(i)) + tuple(kn),
                ONE_TAILED,
                raw_fn=lambda p, s=spline: s(p),
                raw_qdf=lambda p, d=deriv: d(p),
            )
        )
    return members


def make_custom(
    fn: Callable[[np.ndarray], np.ndarray],
    tail_type: str = TWO_TAILED,
    qdf: Callable[[np.ndarray], np.ndarray] | None = None,
    standardize: bool = False,
) -> BasisFunction:
    """Wrap an arbitrary vectorized non-decreasing function as a basis.

    Custom bases are not serializable; they are intended for experiments and
    oracles.  By default the function is used as-is (no standardization).
    """
    return BasisFunction("custom", (), tail_type, raw_fn=fn, raw_qdf=qdf, standardize=standardize)


_GB2_REBUILD = lambda params: make_gb2(*params)  # noqa: E731

_KIND_REBUILDERS: dict[str, Callable[[tuple[float, ...]], BasisFunction]] = {
    "constant": lambda params: constant_basis(),
    "normal": lambda params: make_normal(),
    "exponential": lambda params: make_exponential(),
    "student_t": lambda params: make_student_t(*params),
    "skewed_t": lambda params: make_skewed_t(*params),
    "gb2": _GB2_REBUILD,
}


def restore_basis(
    kind: str, params: Sequence[float], tail_type: str, shift: float, scale: float
) -> BasisFunction:
    """Rebuild a serialized basis, reusing the stored standardization verbatim.

    Using the stored ``(shift, scale)`` instead of recomputing them keeps the
    round trip bit-exact.
    """
    params = tuple(float(v) for v in params)
    if kind == "ispline":
        degree, index = int(params[0]), int(params[1])
        members = make_ispline_basis(degree, params[2:])
        template = members[index - 1]
        return BasisFunction(
            kind, params, tail_type, template._raw_fn, template._raw_qdf, shift=shift, scale=scale
        )
    if kind not in _KIND_REBUILDERS:
        raise ParameterError(f"cannot restore basis of kind {kind!r}")
    template = _KIND_REBUILDERS[kind](params)
    return BasisFunction(
        kind, params, tail_type, template._raw_fn, template._raw_qdf, shift=shift, scale=scale
    )


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------


def _grid_values(spec, key: str) -> list[float]:
    """Expand a parameter grid entry: a number, a list, or start/stop/step."""
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        try:
            start, stop = float(spec["start"]), float(spec["stop"])
        except KeyError as exc:
            raise CatalogError(f"grid for {key!r} needs 'start' and 'stop'") from exc
        if "num" in spec:
            return [float(v) for v in np.linspace(start, stop, int(spec["num"]))]
        step = float(spec.get("step", 1.0))
        if step <= 0.0:
            raise CatalogError(f"grid step for {key!r} must be positive")
        n = int(round((stop - start) / step))
        vals = [start + k * step for k in range(n + 1)]
        return [v for v in vals if v <= stop + 1e-12 * max(1.0, abs(stop))]
    raise CatalogError(f"cannot interpret grid specification for {key!r}: {spec!r}")


def _family_members(block: dict) -> list[BasisFunction]:
    kind = block.get("kind")
    if kind == "normal":
        return [make_normal()]
    if kind == "exponential":
        return [make_exponential()]
    if kind == "student_t":
        return [make_student_t(nu) for nu in _grid_values(block.get("nu", 1.0), "nu")]
    if kind == "skewed_t":
        gammas = _grid_values(block.get("gamma", 1.0), "gamma")
        nus = _grid_values(block.get("nu", 1.0), "nu")
        return [make_skewed_t(g, nu) for g in gammas for nu in nus]
    if kind == "gb2":
        t1s = _grid_values(block.get("theta1", 1.0), "theta1")
        t2s = _grid_values(block.get("theta2", 1.0), "theta2")
        t3s = _grid_values(block.get("theta3", 1.0), "theta3")
        t4s = _grid_values(block.get("theta4", 1.0), "theta4")
        return [
            make_gb2(t1, t2, t3, t4) for t1 in t1s for t2 in t2s for t3 in t3s for t4 in t4s
        ]
    if kind == "ispline":
        degree = int(block.get("degree", 3))
        if "knots" in block:
            knots = [float(v) for v in block["knots"]]
        else:
            knots = [float(v) for v in np.linspace(0.0, 1.0, int(block.get("n_knots", 4)))]
        return make_ispline_basis(degree, knots)
    raise CatalogError(f"unknown basis family kind {block.get('kind')!r}")


def make_catalog(spec: dict) -> list[BasisFunction]:
    """Build a standardized, filtered catalog from a grid description.

    ``spec`` is a mapping with a ``families`` list (each entry a family block
    with parameter grids) and an optional ``filter`` block.  The filter keeps
    a member only if its quantile at ``p_lo`` is at least ``q_min`` and its
    quantile at ``p_hi`` is at most ``q_max``; the levels may be given
    directly (``p_lo``/``p_hi``) or through ``sample_size`` N as
    ``(1/(N+1), N/(N+1))``.  The constant basis is always first and never
    filtered.

    Raises
    ------
    CatalogError
        If the grid is empty or the filter removes every non-constant member.
    """
    families = spec.get("families")
    if not families:
        raise CatalogError("catalog specification lists no families")
    members: list[BasisFunction] = []
    for block in families:
        members.extend(_family_members(dict(block)))
    if not members:
        raise CatalogError("catalog grid expanded to no members")

    filt = spec.get("filter")
    if filt:
        if "sample_size" in filt:
            n = int(filt["sample_size"])
            p_lo, p_hi = 1.0 / (n + 1.0), n / (n + 1.0)
        else:
            p_lo = float(filt.get("p_lo", 1e-4))
            p_hi = float(filt.get("p_hi", 1.0 - 1e-4))
        q_min = float(filt.get("q_min", 1e-4))
        q_max = float(filt.get("q_max", 1e3))
        kept = [b for b in members if b(p_lo) >= q_min and b(p_hi) <= q_max]
        if not kept:
            raise CatalogError(
                f"quantile-range filter (p_lo={p_lo:g}, q_min={q_min:g}, "
                f"p_hi={p_hi:g}, q_max={q_max:g}) removed all {len(members)} members"
            )
        members = kept
    return [constant_basis()] + members


def catalog_rows(catalog: Iterable[BasisFunction]) -> list[dict]:
    """One table row per catalog member: kind, parameters, shift, scale."""
    return [
        {
            "kind": b.kind,
            "parameters": ";".join(repr(v) for v in b.params),
            "shift": b.shift,
            "scale": b.scale,
        }
        for b in catalog
    ]
