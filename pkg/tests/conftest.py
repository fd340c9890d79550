import numpy as np
import pytest

import quantmix as qm


@pytest.fixture
def small_catalog():
    return [qm.constant_basis(), qm.make_normal(), qm.make_exponential()]


@pytest.fixture
def skewed_catalog():
    cat = [qm.constant_basis()]
    cat += [qm.make_skewed_t(g, nu) for g in (0.5, 2.0) for nu in (5.0, 15.0)]
    return cat


def exact_problem(catalog, theta, n, **kwargs):
    """Design problem whose y are the true mixture quantiles at the plotting
    positions, so any sensible fit recovers theta with zero residuals."""
    p = qm.plotting_positions(n)
    y = np.zeros(n)
    for coef, b in zip(theta, catalog):
        y += coef * b(p)
    return qm.build_problem(y, catalog, **kwargs)
