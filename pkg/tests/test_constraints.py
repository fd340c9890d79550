import numpy as np
import pytest

import quantmix as qm
from quantmix.errors import DivergentIntegralError, DomainError, ParameterError
from quantmix.solve import fit_lad, fit_wls, lmoment_constraint_rows

from conftest import exact_problem


class TestCvarCoefficients:
    def test_constant_basis_is_one(self):
        b = qm.constant_basis()
        for p in (0.0, 0.25, 0.5, 0.9, 0.99):
            assert qm.cvar_coefficients(b, p) == pytest.approx(1.0, abs=1e-10)

    def test_exponential_analytic(self):
        # Raw tail average of -ln(1-u) above p is 1 - ln(1-p); standardized
        # by the interquartile range ln 3.
        b = qm.make_exponential()
        for p in (0.0, 0.3, 0.9):
            expected = (1.0 - np.log1p(-p)) / np.log(3.0)
            assert qm.cvar_coefficients(b, p) == pytest.approx(expected, abs=2e-9)

    def test_dominates_quantile(self):
        for b in (qm.make_normal(), qm.make_student_t(4.0), qm.make_gb2(1, 1, 2, 3)):
            for p in (0.05, 0.5, 0.95):
                assert qm.cvar_coefficients(b, p) >= b(p) - 1e-9

    def test_divergent_tail_reported(self):
        infinite_mean = qm.make_gb2(1.0, 1.0, 2.0, 1.0)
        with pytest.raises(DivergentIntegralError):
            qm.cvar_coefficients(infinite_mean, 0.5)

    def test_domain(self):
        with pytest.raises(DomainError):
            qm.cvar_coefficients(qm.constant_basis(), 1.0)


class TestLMomentRows:
    def test_constant_basis_forces_intercept(self):
        cat = [qm.constant_basis()]
        rows = lmoment_constraint_rows(cat, 1, [5.0], 0.0)
        np.testing.assert_allclose(rows.matrix, [[1.0]])
        prob = exact_problem(cat, np.array([3.0]), 12)
        res = fit_wls(prob, qm.ConstraintSet(lmoment=(1, 0.0, (5.0,))))
        assert res.theta[0] == pytest.approx(5.0, abs=1e-10)

    def test_huge_tolerance_is_inactive(self, small_catalog):
        rng = np.random.default_rng(3)
        sample = rng.normal(2.0, 1.0, size=60)
        prob = qm.build_problem(sample, small_catalog)
        target = tuple(qm.sample_lmoments(sample, 2))
        free = fit_wls(prob, qm.ConstraintSet(nonneg=True))
        loose = fit_wls(prob, qm.ConstraintSet(nonneg=True, lmoment=(2, 1e6, target)))
        np.testing.assert_allclose(loose.theta, free.theta, atol=1e-8)

    def test_exact_matching_reproduces_lmoment_fit(self):
        # Two bases, two L-moment equations: the eps=0 feasible set is the
        # single point solving the 2x2 linear system.
        cat = [qm.constant_basis(), qm.make_normal()]
        lmat = np.array(
            [
                [1.0, qm.lmoment_of_basis(cat[1], 1)],
                [0.0, qm.lmoment_of_basis(cat[1], 2)],
            ]
        )
        theta_star = np.array([1.3, 0.8])
        target = lmat @ theta_star
        prob = exact_problem(cat, np.array([0.0, 1.0]), 40)
        res = fit_wls(prob, qm.ConstraintSet(lmoment=(2, 0.0, tuple(target))))
        direct = np.linalg.solve(lmat, target)
        np.testing.assert_allclose(res.theta, direct, atol=1e-8)
        np.testing.assert_allclose(res.theta, theta_star, atol=1e-8)

    def test_lad_aux_system_matches_qp_expansion(self, small_catalog):
        rng = np.random.default_rng(11)
        sample = rng.normal(1.0, 1.0, size=40)
        prob = qm.build_problem(sample, small_catalog)
        target = tuple(float(v) * 1.05 for v in qm.sample_lmoments(sample, 2))
        cons = qm.ConstraintSet(nonneg=True, lmoment=(2, 0.01, target))
        res_simplex = fit_lad(prob, cons, backend="simplex")
        res_highs = fit_lad(prob, cons, backend="highs")
        assert res_simplex.objective == pytest.approx(res_highs.objective, abs=1e-8)
        rows = lmoment_constraint_rows(small_catalog, 2, target, 0.01)
        gap = np.abs(rows.matrix @ res_simplex.theta - rows.target).sum()
        assert gap <= 0.01 + 1e-8

    def test_aux_system_shape(self, small_catalog):
        rows = lmoment_constraint_rows(small_catalog, 3, [1.0, 0.5, 0.1], 0.2)
        a, b = rows.aux_system()
        assert a.shape == (7, len(small_catalog) + 3)
        assert b[-1] == pytest.approx(0.2)

    def test_validation(self, small_catalog):
        with pytest.raises(ParameterError):
            lmoment_constraint_rows(small_catalog, 5, [0.0] * 5, 0.1)
        with pytest.raises(ParameterError):
            lmoment_constraint_rows(small_catalog, 2, [0.0, 0.0], -1.0)
