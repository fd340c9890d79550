import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import quantmix as qm
from quantmix.errors import DataError, DomainError, ParameterError


class TestPlottingPositions:
    def test_standard_n3(self):
        np.testing.assert_allclose(qm.plotting_positions(3), [0.25, 0.5, 0.75])

    def test_shrunk_tail_adjustment(self):
        # Band covering only the extreme ranks of nine points.
        scheme = qm.PlottingScheme(kind="shrunk", shrink_band=0.15)
        p = qm.plotting_positions(9, scheme)
        assert p[0] == pytest.approx(0.05)
        assert p[-1] == pytest.approx(0.95)
        np.testing.assert_allclose(p[1:-1], np.arange(2, 9) / 10.0)

    def test_fixed_levels_passthrough(self):
        scheme = qm.PlottingScheme(kind="fixed-levels", levels=(0.1, 0.5, 0.9))
        np.testing.assert_array_equal(qm.plotting_positions(1000, scheme), [0.1, 0.5, 0.9])

    def test_small_sample_rejected(self):
        with pytest.raises(DataError):
            qm.plotting_positions(1)

    @pytest.mark.parametrize("n", [2, 9, 100, 10_001, 1_000_000])
    @pytest.mark.parametrize("kind", ["standard", "shrunk"])
    def test_strictly_increasing_inside_unit_interval(self, n, kind):
        scheme = qm.PlottingScheme(kind=kind, shrink_band=0.01) if kind == "shrunk" else qm.PlottingScheme()
        p = qm.plotting_positions(n, scheme)
        assert p[0] > 0.0 and p[-1] < 1.0
        assert np.all(np.diff(p) > 0.0)

    def test_invalid_schemes(self):
        with pytest.raises(ParameterError):
            qm.PlottingScheme(kind="bogus")
        with pytest.raises(ParameterError):
            qm.PlottingScheme(kind="shrunk", shrink_band=0.7)
        with pytest.raises(ParameterError):
            qm.PlottingScheme(kind="fixed-levels")
        with pytest.raises(DomainError):
            qm.PlottingScheme(kind="fixed-levels", levels=(0.5, 0.5))


class TestPluginWeights:
    def test_midpoint_value(self):
        # phi(0)^2 / 0.25 = (1/sqrt(2 pi))^2 * 4 = 2/pi
        assert qm.plugin_normal_weights([0.5])[0] == pytest.approx(2.0 / math.pi, abs=1e-12)

    def test_symmetry(self):
        w = qm.plugin_normal_weights([0.2, 0.8])
        assert w[0] == pytest.approx(w[1], rel=1e-12)

    def test_tail_downweighting(self):
        w = qm.plugin_normal_weights([0.001, 0.5])
        assert w[0] < w[1]

    def test_domain(self):
        with pytest.raises(DomainError):
            qm.plugin_normal_weights([0.0, 0.5])


class TestOrderStatCovariance:
    def test_single_level(self):
        np.testing.assert_allclose(qm.order_stat_covariance([0.5], [1.0]), [[0.25]])

    def test_two_levels_hand_value(self):
        c = qm.order_stat_covariance([0.25, 0.75], [1.0, 1.0])
        np.testing.assert_allclose(c, [[0.1875, 0.0625], [0.0625, 0.1875]])
        assert np.all(np.linalg.eigvalsh(c) > 0)

    def test_density_scaling(self):
        p = [0.2, 0.5, 0.8]
        base = qm.order_stat_covariance(p, [1.0, 1.0, 1.0])
        scaled = qm.order_stat_covariance(p, [2.0, 2.0, 2.0])
        np.testing.assert_allclose(scaled, base / 4.0)

    def test_cholesky_succeeds_at_200_levels(self):
        p = np.linspace(0.004, 0.996, 200)
        c = qm.order_stat_covariance(p, np.ones(200))
        np.linalg.cholesky(c)

    def test_positive_density_required(self):
        with pytest.raises(ParameterError):
            qm.order_stat_covariance([0.3, 0.6], [1.0, 0.0])


class TestWeightSpec:
    def test_full_optimal_plugin_inverts_covariance(self):
        from scipy.special import ndtri

        p = np.linspace(0.1, 0.9, 9)
        spec = qm.WeightSpec("full-optimal-plugin")
        w = spec.resolve_matrix(p)
        dens = np.exp(-0.5 * ndtri(p) ** 2) / math.sqrt(2 * math.pi)
        c = qm.order_stat_covariance(p, dens)
        np.testing.assert_allclose(w @ c, np.eye(9), atol=1e-8)

    def test_explicit_diagonal(self):
        spec = qm.WeightSpec("explicit", diagonal=(1.0, 2.0, 3.0))
        np.testing.assert_array_equal(spec.resolve_diagonal(np.array([0.25, 0.5, 0.75])), [1, 2, 3])

    def test_explicit_requires_payload(self):
        with pytest.raises(ParameterError):
            qm.WeightSpec("explicit")


class TestBuildProblem:
    def test_sorting_and_design_entries(self, small_catalog):
        prob = qm.build_problem([3.0, 1.0, 2.0], small_catalog)
        np.testing.assert_array_equal(prob.y, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(prob.p, [0.25, 0.5, 0.75])
        assert prob.X[1, 1] == pytest.approx(0.0, abs=1e-12)  # normal median
        np.testing.assert_array_equal(prob.X[:, 0], np.ones(3))

    def test_identity_quantile_exact_positions(self):
        # Five points placed at their true levels n/6 under Q(p) = p.
        ident = qm.make_custom(lambda p: np.asarray(p))
        cat = [qm.constant_basis(), ident]
        y = np.arange(1, 6) / 6.0
        prob = qm.build_problem(y, cat)
        theta = np.linalg.lstsq(prob.X, prob.y, rcond=None)[0]
        np.testing.assert_allclose(prob.X @ theta, prob.y, atol=1e-14)
        np.testing.assert_allclose(theta, [0.0, 1.0], atol=1e-12)

    def test_permutation_invariance(self, small_catalog):
        rng = np.random.default_rng(5)
        sample = rng.normal(size=40)
        a = qm.build_problem(sample, small_catalog)
        b = qm.build_problem(rng.permutation(sample), small_catalog)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.X, b.X)

    def test_fixed_levels_order_statistics(self, small_catalog):
        sample = np.arange(1.0, 10.0)  # nine points
        scheme = qm.PlottingScheme(kind="fixed-levels", levels=(0.3, 0.5))
        prob = qm.build_problem(sample, scheme=scheme, catalog=small_catalog)
        # ceil(0.3 * 10) = 3 -> third order statistic; ceil(0.5 * 10) = 5.
        np.testing.assert_array_equal(prob.y, [3.0, 5.0])
        assert prob.n_obs == 9

    def test_fixed_levels_match_plotting_positions(self, small_catalog):
        # Levels j/(N+1) select exactly the j-th order statistic.
        sample = np.arange(1.0, 10.0)
        scheme = qm.PlottingScheme(kind="fixed-levels", levels=(2 / 10, 7 / 10))
        prob = qm.build_problem(sample, scheme=scheme, catalog=small_catalog)
        np.testing.assert_array_equal(prob.y, [2.0, 7.0])

    def test_empty_sample_rejected(self, small_catalog):
        with pytest.raises(DataError):
            qm.build_problem([], small_catalog)

    def test_catalog_must_start_with_constant(self):
        with pytest.raises(ParameterError):
            qm.build_problem([1.0, 2.0], [qm.make_normal()])

    @given(st.integers(2, 400))
    @settings(max_examples=25, deadline=None)
    def test_shapes_consistent(self, n):
        cat = [qm.constant_basis(), qm.make_normal()]
        sample = np.linspace(-1.0, 1.0, n)
        prob = qm.build_problem(sample, cat)
        assert prob.X.shape == (n, 2)
        assert prob.y.shape == (n,)
        assert prob.p.shape == (n,)
