import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import quantmix.data as qd
from quantmix.errors import DataError


class TestDrawdownSeries:
    def test_hand_computed_example(self):
        d = qd.drawdown_series([100.0, 90.0, 110.0, 99.0, 121.0])
        np.testing.assert_allclose(d, [0.0, 0.10, 0.0, 0.10, 0.0])

    def test_monotone_prices_no_drawdown(self):
        d = qd.drawdown_series(np.linspace(10.0, 20.0, 25))
        np.testing.assert_array_equal(d, np.zeros(25))

    def test_constant_prices(self):
        d = qd.drawdown_series([5.0] * 8)
        np.testing.assert_array_equal(d, np.zeros(8))

    def test_first_point_zero(self):
        rng = np.random.default_rng(1)
        prices = np.exp(rng.normal(size=50).cumsum() * 0.05) * 100
        d = qd.drawdown_series(prices)
        assert d[0] == 0.0
        assert np.all((d >= 0.0) & (d < 1.0))

    def test_nonpositive_price_rejected(self):
        with pytest.raises(DataError):
            qd.drawdown_series([1.0, -2.0])


class TestDrawdownPeriods:
    def test_two_periods(self):
        recs = qd.drawdown_periods([0.0, 0.10, 0.0, 0.10, 0.0])
        assert len(recs) == 2
        assert (recs[0].start, recs[0].end) == (0, 2)
        assert (recs[1].start, recs[1].end) == (2, 4)
        for r in recs:
            assert r.max_drawdown == pytest.approx(0.10)
            assert r.log_drawdown == pytest.approx(np.log(0.10))
            assert not r.open_ended

    def test_all_zero(self):
        assert qd.drawdown_periods(np.zeros(10)) == []

    def test_single_bracketed_run(self):
        recs = qd.drawdown_periods([0.0, 0.05, 0.2, 0.1, 0.0])
        assert len(recs) == 1
        assert recs[0].max_drawdown == pytest.approx(0.2)

    def test_trailing_run_flagged_open(self):
        recs = qd.drawdown_periods([0.0, 0.0, 0.1, 0.3])
        assert len(recs) == 1
        assert recs[0].open_ended
        assert recs[0].end == 3
        assert recs[0].max_drawdown == pytest.approx(0.3)
        assert qd.drawdown_periods([0.0, 0.0, 0.1, 0.3], include_open=False) == []

    def test_concatenation_at_running_max(self):
        # Splitting a walk at a fresh running maximum must not change the
        # extracted periods.
        rng = np.random.default_rng(7)
        for _ in range(50):
            prices = np.exp(np.cumsum(rng.normal(0.01, 0.05, size=120))) * 50
            running = np.maximum.accumulate(prices)
            cut_points = np.flatnonzero(prices == running)
            cut = int(cut_points[len(cut_points) // 2])
            if cut in (0, len(prices) - 1):
                continue
            whole = qd.drawdown_periods(qd.drawdown_series(prices), include_open=True)
            left = qd.drawdown_periods(qd.drawdown_series(prices[: cut + 1]), include_open=True)
            right = qd.drawdown_periods(qd.drawdown_series(prices[cut:]), include_open=True)
            # The right-hand piece starts at its own maximum because the cut
            # price is the running max of the prefix and prices are relative.
            merged = [(r.start, r.end, r.max_drawdown) for r in left] + [
                (r.start + cut, r.end + cut, r.max_drawdown) for r in right
            ]
            expected = [(r.start, r.end, r.max_drawdown) for r in whole]
            assert len(merged) == len(expected)
            for (s1, e1, m1), (s2, e2, m2) in zip(merged, expected):
                assert (s1, e1) == (s2, e2)
                assert m1 == pytest.approx(m2, rel=1e-12)

    @given(st.lists(st.floats(-0.2, 0.2), min_size=2, max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_period_count_bounded_by_transitions(self, increments):
        prices = 100.0 * np.exp(np.cumsum(np.asarray(increments)))
        d = qd.drawdown_series(prices)
        recs = qd.drawdown_periods(d)
        transitions = int(np.sum((d[1:] > 0) & (d[:-1] == 0.0)))
        if d[0] > 0:
            transitions += 1
        assert len(recs) <= max(transitions, 1)


class TestLoadPrices:
    def test_well_formed(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("Date,Adj Close\n2020-01-02,100\n2020-01-03,101\n2020-01-06,99\n")
        series = qd.load_prices(f)
        assert len(series.price) == 3
        np.testing.assert_array_equal(series.price, [100.0, 101.0, 99.0])

    def test_non_numeric_price_names_row(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("Date,Adj Close\n2020-01-02,100\n2020-01-03,oops\n")
        with pytest.raises(DataError, match=":3"):
            qd.load_prices(f)

    def test_unsorted_rows_sorted(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("Date,Adj Close\n2020-01-06,99\n2020-01-02,100\n2020-01-03,101\n")
        series = qd.load_prices(f)
        np.testing.assert_array_equal(series.price, [100.0, 101.0, 99.0])

    def test_duplicate_dates_rejected(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("Date,Adj Close\n2020-01-02,100\n2020-01-02,101\n")
        with pytest.raises(DataError, match="duplicate"):
            qd.load_prices(f)

    def test_nonpositive_price_rejected(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("Date,Adj Close\n2020-01-02,0\n")
        with pytest.raises(DataError):
            qd.load_prices(f)

    def test_column_selection(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("Date,Close,Other\n2020-01-02,100,1\n2020-01-03,103,2\n")
        series = qd.load_prices(f, price_column="Close")
        np.testing.assert_array_equal(series.price, [100.0, 103.0])
        with pytest.raises(DataError):
            qd.load_prices(f)  # no "Adj Close" header


class TestLoadSample:
    def test_one_value_per_line(self, tmp_path):
        f = tmp_path / "s.txt"
        f.write_text("1.5\n-2.25\n3\n")
        np.testing.assert_array_equal(qd.load_sample(f), [1.5, -2.25, 3.0])

    def test_csv_column(self, tmp_path):
        f = tmp_path / "s.csv"
        f.write_text("a,b\n1,10\n2,20\n")
        np.testing.assert_array_equal(qd.load_sample(f, column="b"), [10.0, 20.0])

    def test_parse_error_names_line(self, tmp_path):
        f = tmp_path / "s.txt"
        f.write_text("1.5\nbogus\n")
        with pytest.raises(DataError, match=":2"):
            qd.load_sample(f)
