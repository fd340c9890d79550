import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import betainc
from scipy.stats import t as student_t

import quantmix as qm
from quantmix.errors import CatalogError, DomainError, ParameterError, StandardizationError

GRID = np.linspace(1e-6, 1 - 1e-6, 999)


class TestStandardization:
    def test_normal_median_zero(self):
        assert qm.make_normal()(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_normal_upper_quartile_half(self):
        assert qm.make_normal()(0.75) == pytest.approx(0.5, abs=1e-12)

    def test_exponential_median(self):
        # Raw quantile -ln(1-p) has interquartile range ln 3; standardizing
        # numerically must agree with the analytic value ln2/ln3.
        b = qm.make_exponential()
        raw = lambda p: -np.log1p(-p)  # noqa: E731
        numeric = (raw(0.5) - raw(1e-12)) / (raw(0.75) - raw(0.25))
        assert b(0.5) == pytest.approx(numeric, abs=1e-15)
        assert b(0.5) == pytest.approx(math.log(2) / math.log(3), abs=1e-9)

    def test_identities_two_tailed(self):
        for b in [qm.make_normal(), qm.make_student_t(4.5), qm.make_skewed_t(1.7, 6.0)]:
            assert abs(b(0.5)) <= 1e-9
            assert abs(b(0.75) - b(0.25) - 1.0) <= 1e-9

    def test_identities_one_tailed(self):
        for b in [qm.make_exponential(), qm.make_gb2(1.0, 0.4, 2.0, 3.0)]:
            assert abs(b(1e-12)) <= 1e-9
            assert abs(b(0.75) - b(0.25) - 1.0) <= 1e-9

    def test_constant_is_one(self):
        b = qm.constant_basis()
        assert b(0.3) == 1.0
        assert np.all(b(GRID) == 1.0)


class TestEvalBasis:
    def test_domain_errors(self):
        b = qm.make_normal()
        for bad in (0.0, 1.0, -0.2, 1.4, np.nan):
            with pytest.raises(DomainError):
                b(bad)

    def test_eval_basis_matches_call(self):
        b = qm.make_student_t(7.0)
        assert qm.eval_basis(b, 0.3) == b(0.3)

    def test_vectorized(self):
        b = qm.make_exponential()
        out = b(GRID)
        assert out.shape == GRID.shape

    def test_monotone_all_families(self):
        members = [
            qm.make_normal(),
            qm.make_exponential(),
            qm.make_student_t(3.0),
            qm.make_skewed_t(0.6, 8.0),
            qm.make_gb2(1.0, 1.0, 2.0, 2.0),
            *qm.make_ispline_basis(3, [0.0, 0.4, 1.0]),
        ]
        grid = np.linspace(1e-6, 1 - 1e-6, 10_000)
        for b in members:
            assert np.all(np.diff(b(grid)) >= -1e-12), b.kind


class TestSkewedT:
    def test_median_zero(self):
        assert qm.make_skewed_t(1.0, 5.0)(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_gamma_one_equals_standardized_t(self):
        grid = np.linspace(0.01, 0.99, 99)
        skew = qm.make_skewed_t(1.0, 5.0)
        sym = qm.make_student_t(5.0)
        np.testing.assert_allclose(skew(grid), sym(grid), atol=1e-12)

    def test_quartile_ratio_is_gamma_squared(self):
        # Independent oracle from scipy's t quantile: the two halves are the
        # symmetric t quantile scaled by 1/(gamma R) and gamma/R.
        gamma, nu = 2.0, 5.0
        b = qm.make_skewed_t(gamma, nu)
        q75 = student_t.ppf(0.75, nu)
        norm = (gamma + 1 / gamma) * q75
        assert b(0.75) == pytest.approx(gamma * q75 / norm, rel=1e-12)
        assert b(0.75) / abs(b(0.25)) == pytest.approx(gamma**2, rel=1e-10)

    @given(
        gamma=st.floats(0.25, 4.0),
        nu=st.floats(2.1, 40.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_unit_iqr_any_parameters(self, gamma, nu):
        b = qm.make_skewed_t(gamma, nu)
        assert b(0.75) - b(0.25) == pytest.approx(1.0, abs=1e-10)

    def test_invalid_params(self):
        with pytest.raises(ParameterError):
            qm.make_skewed_t(-1.0, 5.0)
        with pytest.raises(ParameterError):
            qm.make_skewed_t(1.0, 0.0)


class TestGB2:
    def test_lomax_case_raw(self):
        b = qm.make_gb2(1.0, 1.0, 1.0, 1.0)
        assert b.raw(0.5) == pytest.approx(1.0, rel=1e-12)
        grid = np.linspace(0.05, 0.95, 19)
        np.testing.assert_allclose(b.raw(grid), grid / (1 - grid), rtol=1e-10)

    @pytest.mark.parametrize(
        "theta", [(1.0, 1.0, 1.0, 1.0), (2.0, 0.5, 3.0, 2.0), (0.7, 1.5, 2.5, 4.0)]
    )
    def test_cdf_roundtrip(self, theta):
        t1, t2, t3, t4 = theta
        b = qm.make_gb2(*theta)

        def cdf(x):
            z = (x / t2) ** t1
            return betainc(t3, t4, z / (1 + z))

        for p in np.arange(0.1, 0.95, 0.1):
            assert cdf(b.raw(p)) == pytest.approx(p, abs=1e-8)

    def test_theta2_is_pure_scale(self):
        one = qm.make_gb2(1.0, 1.0, 1.0, 1.0)
        two = qm.make_gb2(1.0, 2.0, 1.0, 1.0)
        assert two.raw(0.5) == pytest.approx(2.0 * one.raw(0.5), rel=1e-12)
        grid = np.linspace(0.05, 0.95, 19)
        np.testing.assert_allclose(one(grid), two(grid), rtol=1e-12)

    def test_invalid_params(self):
        with pytest.raises(ParameterError):
            qm.make_gb2(1.0, -1.0, 1.0, 1.0)
        with pytest.raises(ParameterError):
            qm.make_gb2(0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ParameterError):
            qm.make_gb2(-1.0, 1.0, 1.0, 1.0)


class TestISpline:
    def test_count_and_monotone(self):
        members = qm.make_ispline_basis(2, [0.0, 0.5, 1.0])
        assert len(members) == 3
        grid = np.linspace(1e-9, 1 - 1e-9, 1001)
        for b in members:
            assert np.all(np.diff(b(grid)) >= -1e-12)

    def test_terminal_value_one_by_quadrature(self):
        # Integrating the underlying density (the M-spline) over (0, 1) must
        # give 1: integrated M-splines saturate at one.
        from scipy.integrate import quad

        for b in qm.make_ispline_basis(3, [0.0, 0.3, 0.7, 1.0]):
            mass, _ = quad(lambda p: b._raw_qdf(np.array([p]))[0], 0.0, 1.0, limit=200)
            assert mass == pytest.approx(1.0, abs=1e-9)
            assert b.raw(1 - 1e-12) == pytest.approx(1.0, abs=1e-6)

    def test_equal_weight_sum_monotone(self):
        members = qm.make_ispline_basis(3, [0.0, 0.4, 1.0])
        grid = np.linspace(1e-9, 1 - 1e-9, 1001)
        total = sum(b(grid) for b in members)
        assert np.all(np.diff(total) >= -1e-12)

    def test_member_saturating_before_lower_quartile_raises(self):
        # A member flat on (0.25, 0.75) has zero interquartile range: the
        # one-tailed standardization is undefined for it.
        with pytest.raises(StandardizationError):
            qm.make_ispline_basis(3, [0.0, 0.05, 0.1, 0.15, 0.2, 1.0])

    def test_knot_errors(self):
        with pytest.raises(ParameterError):
            qm.make_ispline_basis(3, [0.0, 0.5, 0.4, 1.0])
        with pytest.raises(ParameterError):
            qm.make_ispline_basis(4, [0.0, 1.0])
        with pytest.raises(ParameterError):
            qm.make_ispline_basis(3, [0.1, 0.5, 1.0])


class TestCatalog:
    def test_paper_grid_count(self):
        spec = {
            "families": [
                {
                    "kind": "gb2",
                    "theta1": 1.0,
                    "theta2": {"start": 0.1, "stop": 1.0, "step": 0.1},
                    "theta3": {"start": 1, "stop": 10, "step": 1},
                    "theta4": {"start": 1, "stop": 10, "step": 1},
                }
            ],
            "filter": {"sample_size": 406, "q_min": 1e-4, "q_max": 1e3},
        }
        cat = qm.make_catalog(spec)
        assert cat[0].kind == "constant"
        assert len(cat) == 1001

    def test_no_filter_keeps_everything(self):
        spec = {"families": [{"kind": "student_t", "nu": [4.0, 8.0]}]}
        cat = qm.make_catalog(spec)
        assert len(cat) == 3
        assert cat[0].kind == "constant"

    def test_filter_to_empty_raises(self):
        spec = {
            "families": [{"kind": "gb2", "theta2": [1.0], "theta3": [1.0], "theta4": [1.0]}],
            "filter": {"p_lo": 0.002457, "q_min": 1e6, "p_hi": 0.9975, "q_max": 1e9},
        }
        with pytest.raises(CatalogError):
            qm.make_catalog(spec)

    def test_unknown_family(self):
        with pytest.raises(CatalogError):
            qm.make_catalog({"families": [{"kind": "cauchy"}]})

    def test_linear_independence_of_diverse_members(self):
        # A dozen members from distinct families stay numerically
        # independent on tail-reaching levels.  Two caveats are inherent to
        # the function class: three skewed-t members sharing nu are exactly
        # dependent (each combines the same two half-t functions), and large
        # collections of smooth quantile functions are near-dependent no
        # matter which levels are used.
        cat = qm.make_catalog(
            {
                "families": [
                    {"kind": "normal"},
                    {"kind": "exponential"},
                    {"kind": "student_t", "nu": [3.0, 9.0]},
                    {"kind": "skewed_t", "gamma": [0.5, 2.0], "nu": [6.0]},
                    {"kind": "gb2", "theta3": [1.0, 3.0], "theta4": [2.0]},
                    {"kind": "ispline", "degree": 2, "knots": [0.0, 0.5, 1.0]},
                ]
            }
        )
        assert len(cat) == 12
        levels = np.arange(1, 50) / 50.0
        x = np.column_stack([b(levels) for b in cat])
        sv = np.linalg.svd(x, compute_uv=False)
        assert sv[-1] > 1e-8 * sv[0]

    def test_catalog_rows(self):
        cat = qm.make_catalog({"families": [{"kind": "student_t", "nu": [5.0]}]})
        rows = qm.catalog_rows(cat)
        assert rows[0]["kind"] == "constant"
        assert rows[1]["kind"] == "student_t"
        assert rows[1]["parameters"] == "5.0"
        assert rows[1]["scale"] > 0


class TestCustomAndRestore:
    def test_custom_identity(self):
        b = qm.make_custom(lambda p: np.asarray(p))
        assert b(0.3) == 0.3
        assert not b.is_serializable

    def test_restore_roundtrip(self):
        for b in [qm.make_normal(), qm.make_skewed_t(1.5, 7.0), qm.make_gb2(1.0, 0.5, 2.0, 3.0)]:
            r = qm.restore_basis(b.kind, b.params, b.tail_type, b.shift, b.scale)
            assert r == b
            grid = np.linspace(0.01, 0.99, 31)
            np.testing.assert_array_equal(r(grid), b(grid))

    def test_restore_ispline(self):
        members = qm.make_ispline_basis(2, [0.0, 0.5, 1.0])
        b = members[1]
        r = qm.restore_basis(b.kind, b.params, b.tail_type, b.shift, b.scale)
        grid = np.linspace(0.01, 0.99, 31)
        np.testing.assert_array_equal(r(grid), b(grid))

    def test_degenerate_standardization_raises(self):
        flat = lambda p: np.zeros_like(p)  # noqa: E731
        with pytest.raises(StandardizationError):
            qm.make_custom(flat, standardize=True)
