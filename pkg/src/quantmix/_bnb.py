"""Best-first branch and bound for cardinality-constrained fits.

Nodes progressively fix each candidate basis in or out of the support
(the binary inclusion variables of the mixed-integer formulation).  The
bound at a node is the convex fit with the excluded columns removed, which
is exact: no finite big-M bounds are required, though caller-supplied
variable bounds tighten the relaxation when present.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Callable

import numpy as np

from .errors import InfeasibleError

_PRUNE_EPS = 1e-11


def branch_and_bound(
    n_coef: int,
    card: int,
    relax: Callable[[frozenset, frozenset], tuple[np.ndarray, float]],
    refit: Callable[[frozenset], tuple[np.ndarray, float]],
    node_cap: int = 100_000,
    zero_tol: float = 1e-8,
) -> tuple[np.ndarray, float, bool]:
    """Minimize over supports of size <= ``card`` among coefficients 1..n_coef-1.

    ``relax(f0, f1)`` solves the convex problem with coefficients in ``f0``
    forced to zero and those in ``f1`` marked in-support; ``refit(support)``
    solves restricted to exactly ``support``.  Index 0 (the intercept) never
    counts toward the cardinality.  Returns ``(theta, objective, optimal)``.
    """
    all_idx = frozenset(range(1, n_coef))
    best_theta: np.ndarray | None = None
    best_obj = np.inf

    counter = itertools.count()
    heap: list[tuple[float, int, frozenset, frozenset]] = [
        (-np.inf, next(counter), frozenset(), frozenset())
    ]
    nodes = 0
    while heap:
        bound, _, f1, f0 = heapq.heappop(heap)
        if bound >= best_obj - _PRUNE_EPS:
            continue
        nodes += 1
        if nodes > node_cap:
            if best_theta is None:
                raise InfeasibleError("node cap hit before any feasible support was found")
            return best_theta, best_obj, False
        try:
            theta, obj = relax(f0, f1)
        except InfeasibleError:
            continue
        if obj >= best_obj - _PRUNE_EPS:
            continue
        support = frozenset(
            i for i in range(1, n_coef) if i not in f0 and abs(theta[i]) > zero_tol
        )
        if len(support) <= card:
            if obj < best_obj:
                best_obj, best_theta = obj, theta
            continue

        # Heuristic incumbent: refit on the forced set plus the largest
        # relaxed coefficients, capped at the cardinality budget.
        ranked = sorted(support - f1, key=lambda i: -abs(theta[i]))
        cand = frozenset(list(f1) + ranked[: max(card - len(f1), 0)])
        try:
            h_theta, h_obj = refit(cand)
        except InfeasibleError:
            h_theta, h_obj = None, np.inf
        if h_theta is not None and h_obj < best_obj:
            best_obj, best_theta = h_obj, h_theta

        branch_i = max(support - f1, key=lambda i: abs(theta[i]))
        heapq.heappush(heap, (obj, next(counter), f1, f0 | {branch_i}))
        child_f1 = f1 | {branch_i}
        child_f0 = f0 if len(child_f1) < card else (all_idx - child_f1)
        heapq.heappush(heap, (obj, next(counter), child_f1, child_f0))

    if best_theta is None:
        raise InfeasibleError("cardinality constraint admits no feasible support")
    return best_theta, best_obj, True
