import itertools
import math
from datetime import date, timedelta

import numpy as np
import pytest

from bunforge.errors import ValidationError
from bunforge.market import (
    MINUTES_PER_DAY,
    PriceSeries,
    VolDay,
    VolSeries,
    _midranks,
    daily_vol_series,
    load_candles_csv,
    rolling_sweep,
    vol1,
    wilcoxon_signed_rank,
    yearly_stats,
)

DAY_MS = 86_400_000


def minute_points(day_index, closes, start_minute=0):
    base = day_index * DAY_MS + start_minute * 60_000
    return [(base + i * 60_000, c) for i, c in enumerate(closes)]


def full_day_series(daily_closes):
    """One PriceSeries with 1440 closes per day."""
    points = []
    for day_index, closes in enumerate(daily_closes):
        assert len(closes) == MINUTES_PER_DAY
        points.extend(minute_points(day_index, closes))
    return PriceSeries(pair="BTC-USDT", points=points)


def enumeration_p(diffs):
    """Oracle: walk all sign assignments of the ranked absolute differences."""
    diffs = [d for d in diffs if d != 0]
    n = len(diffs)
    ranks = _midranks(np.abs(np.array(diffs)))
    observed = sum(r for d, r in zip(diffs, ranks) if d > 0)
    outcomes = [sum(signs[i] * ranks[i] for i in range(n)) for signs in itertools.product([0, 1], repeat=n)]
    le = sum(1 for w in outcomes if w <= observed + 1e-12)
    ge = sum(1 for w in outcomes if w >= observed - 1e-12)
    return min(1.0, 2.0 * min(le, ge) / len(outcomes))


class TestCandleLoading:
    def _write(self, tmp_path, rows, header=False):
        path = tmp_path / "candles.csv"
        lines = (["timestamp_ms,open,high,low,close,volume"] if header else []) + rows
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_loads_with_and_without_header(self, tmp_path):
        rows = ["60000,1,1,1,100.5,3", "120000,1,1,1,101.0,3"]
        for header in (False, True):
            series = load_candles_csv(self._write(tmp_path, rows, header))
            assert series.points == [(60000, 100.5), (120000, 101.0)]

    def test_rejects_nonpositive_close(self, tmp_path):
        with pytest.raises(ValidationError, match="positive"):
            load_candles_csv(self._write(tmp_path, ["60000,1,1,1,0,3"]))

    def test_rejects_unordered_timestamps(self, tmp_path):
        with pytest.raises(ValidationError, match="increasing"):
            load_candles_csv(self._write(tmp_path, ["120000,1,1,1,2,3", "60000,1,1,1,2,3"]))

    def test_rejects_off_grid(self, tmp_path):
        with pytest.raises(ValidationError, match="grid"):
            load_candles_csv(self._write(tmp_path, ["60000,1,1,1,2,3", "90000,1,1,1,2,3"]))


class TestVol1:
    def test_constant_day_is_zero(self):
        assert vol1([100.0] * (MINUTES_PER_DAY + 1)) == 0.0

    def test_alternating_day_closed_form(self):
        sigma = 0.001
        prices = [100.0 * math.exp(sigma * (i % 2)) for i in range(MINUTES_PER_DAY + 1)]
        expected = sigma * math.sqrt(MINUTES_PER_DAY * MINUTES_PER_DAY / (MINUTES_PER_DAY - 1))
        assert vol1(prices) == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(0.03796, abs=5e-6)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        closes = 100.0 * np.exp(np.cumsum(rng.normal(0, 5e-4, MINUTES_PER_DAY + 1)))
        assert vol1(closes * 17.3) == pytest.approx(vol1(closes), rel=1e-12)

    def test_partial_day_scales_by_available_count(self):
        rng = np.random.default_rng(6)
        m = 1300  # above the 90% floor of 1296
        closes = 50.0 * np.exp(np.cumsum(rng.normal(0, 5e-4, m + 1)))
        returns = np.diff(np.log(closes))
        assert vol1(closes) == pytest.approx(returns.std(ddof=1) * math.sqrt(m), rel=1e-12)

    def test_insufficient_samples(self):
        with pytest.raises(ValidationError, match="insufficient samples"):
            vol1([100.0] * 1200)

    def test_nonpositive_price_rejected(self):
        prices = [100.0] * (MINUTES_PER_DAY + 1)
        prices[3] = 0.0
        with pytest.raises(ValidationError, match="positive"):
            vol1(prices)


class TestDailySeries:
    def test_anchors_on_previous_close(self):
        day0 = [100.0] * MINUTES_PER_DAY
        day1 = [100.0] * MINUTES_PER_DAY
        day1[0] = 101.0  # jump at midnight, visible only through the anchor
        series = full_day_series([day0, day1])
        vols = daily_vol_series(series)
        assert len(vols.days) == 2
        assert vols.days[0].n_samples == MINUTES_PER_DAY - 1  # no anchor for day 0
        assert vols.days[1].n_samples == MINUTES_PER_DAY
        assert vols.days[0].vol1 == 0.0
        assert vols.days[1].vol1 > 0.0

    def test_low_coverage_day_excluded(self):
        day0 = [100.0] * MINUTES_PER_DAY
        short = [100.0] * 600
        series = PriceSeries(
            pair="x",
            points=minute_points(0, day0) + minute_points(1, short),
        )
        vols = daily_vol_series(series)
        assert [d.day for d in vols.days] == [date(1970, 1, 1)]
        assert vols.excluded == [(date(1970, 1, 2), 600)]

    def test_gap_day_breaks_anchor(self):
        day0 = [100.0] * MINUTES_PER_DAY
        day2 = [100.0] * MINUTES_PER_DAY
        series = PriceSeries(pair="x", points=minute_points(0, day0) + minute_points(2, day2))
        vols = daily_vol_series(series)
        assert [d.n_samples for d in vols.days] == [MINUTES_PER_DAY - 1, MINUTES_PER_DAY - 1]

    def test_empty_series(self):
        assert daily_vol_series(PriceSeries(pair="x", points=[])).days == []


class TestWilcoxon:
    def test_identical_samples_degenerate(self):
        res = wilcoxon_signed_rank([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert (res.p_value, res.h, res.n_pairs) == (1.0, 0, 0)
        assert res.all_zero

    def test_five_positive_distinct_pairs(self):
        x_b = [5.0, 6.0, 7.0, 8.0, 9.0]
        x_a = [1.0, 2.5, 3.0, 3.5, 4.0]
        res = wilcoxon_signed_rank(x_b, x_a)
        assert res.p_value == pytest.approx(0.0625, abs=1e-15)
        assert res.h == 0
        assert res.n_pairs == 5

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(808)
        for _ in range(60):
            n = 7
            x_b = rng.normal(0, 1, n)
            x_a = x_b + rng.normal(0.3, 1.0, n)
            res = wilcoxon_signed_rank(x_b, x_a)
            assert res.p_value == pytest.approx(enumeration_p(x_b - x_a), abs=1e-12)

    def test_ties_use_midranks(self):
        # equal-magnitude differences force midranks in the enumeration too
        x_b = [3.0, 3.0, 1.0, 5.0, 5.0, 2.0, 2.0]
        x_a = [1.0, 1.0, 2.0, 2.0, 2.0, 4.0, 4.0]
        res = wilcoxon_signed_rank(x_b, x_a)
        assert res.p_value == pytest.approx(enumeration_p(np.array(x_b) - np.array(x_a)), abs=1e-12)

    def test_zero_differences_dropped(self):
        x_b = [1.0, 2.0, 5.0, 9.0]
        x_a = [1.0, 2.0, 4.0, 7.0]
        res = wilcoxon_signed_rank(x_b, x_a)
        assert res.n_pairs == 2

    def test_swap_symmetry(self):
        rng = np.random.default_rng(809)
        for _ in range(200):
            n = int(rng.integers(3, 30))
            x_b = rng.normal(0, 1, n)
            x_a = rng.normal(0.1, 1, n)
            a = wilcoxon_signed_rank(x_b, x_a)
            b = wilcoxon_signed_rank(x_a, x_b)
            assert a.p_value == b.p_value
            assert a.h == b.h

    def test_normal_close_to_exact_in_overlap(self):
        rng = np.random.default_rng(810)
        worst = 0.0
        for _ in range(300):
            n = int(rng.integers(10, 26))
            x_b = rng.normal(0, 1, n)
            x_a = x_b + rng.normal(0.2, 0.8, n)
            exact = wilcoxon_signed_rank(x_b, x_a, method="exact")
            approx = wilcoxon_signed_rank(x_b, x_a, method="normal")
            worst = max(worst, abs(exact.p_value - approx.p_value))
        assert worst < 0.02

    def test_alpha_controls_h(self):
        x_b = [5.0, 6.0, 7.0, 8.0, 9.0]
        x_a = [1.0, 2.5, 3.0, 3.5, 4.0]
        assert wilcoxon_signed_rank(x_b, x_a, alpha=0.1).h == 1
        assert wilcoxon_signed_rank(x_b, x_a, alpha=0.05).h == 0

    def test_validation(self):
        with pytest.raises(ValidationError):
            wilcoxon_signed_rank([1.0], [1.0, 2.0])
        with pytest.raises(ValidationError):
            wilcoxon_signed_rank([], [])
        with pytest.raises(ValidationError, match="method"):
            wilcoxon_signed_rank([1.0], [2.0], method="bootstrap")


def vol_series_from_values(values, start=date(2024, 1, 1)):
    days = [VolDay(day=start + timedelta(days=i), vol1=v, n_samples=MINUTES_PER_DAY) for i, v in enumerate(values)]
    return VolSeries(pair="BTC-USDT", days=days)


class TestRollingSweep:
    def test_constant_series_never_significant(self):
        vols = vol_series_from_values([0.02] * 30)
        result = rolling_sweep(vols, window=7)
        assert len(result.rows) == 30 - 14
        assert all(r.p_value == 1.0 and r.h == 0 for r in result.rows)

    def test_row_count(self):
        vols = vol_series_from_values([0.01 * (1 + i % 5) for i in range(40)])
        assert len(rolling_sweep(vols, window=7).rows) == 40 - 14
        assert len(rolling_sweep(vols, window=3).rows) == 40 - 6

    def test_level_shift_detection_band(self):
        # Step from 0.01 to 0.02 at day index 15. With window 7 the number
        # of non-zero pairs is 8-(D0-D) before the step and 7-(D-D0) from it,
        # and the all-equal signs give p = 2/2^k, significant only for k >= 6:
        # exactly D in {13, 14, 15, 16}.
        values = [0.01] * 15 + [0.02] * 15
        vols = vol_series_from_values(values)
        result = rolling_sweep(vols, window=7)
        significant = [r.event_day for r in result.rows if r.h == 1]
        base = date(2024, 1, 1)
        assert significant == [base + timedelta(days=i) for i in (13, 14, 15, 16)]

    def test_span_too_short(self):
        with pytest.raises(ValidationError, match="need >= 15"):
            rolling_sweep(vol_series_from_values([0.01] * 14), window=7)

    def test_gap_days_skipped(self):
        days = [VolDay(day=date(2024, 1, 1) + timedelta(days=i), vol1=0.02, n_samples=MINUTES_PER_DAY)
                for i in range(31) if i != 15]
        result = rolling_sweep(VolSeries(pair="x", days=days), window=7)
        # every window touching the missing Jan 16 is dropped; with 7 days
        # required on each side only Jan 8 and Jan 24 keep clean windows
        assert [r.event_day for r in result.rows] == [date(2024, 1, 8), date(2024, 1, 24)]
        for row in result.rows:
            assert abs((row.event_day - date(2024, 1, 16)).days) > 7


class TestYearlyStats:
    def test_two_values(self):
        vols = vol_series_from_values([0.01, 0.03])
        (stats,) = yearly_stats(vols)
        assert (stats.vol_max, stats.vol_mean, stats.vol_min) == (0.03, 0.02, 0.01)
        assert stats.vol_std == pytest.approx(np.std([0.01, 0.03], ddof=1))

    def test_single_value_degenerate(self):
        vols = vol_series_from_values([0.02])
        (stats,) = yearly_stats(vols)
        assert stats.vol_std == 0.0
        assert stats.degenerate

    def test_matches_direct_aggregates(self):
        rng = np.random.default_rng(7)
        values = list(rng.uniform(0.001, 0.1, 400))
        vols = vol_series_from_values(values, start=date(2023, 6, 1))
        stats = {s.year: s for s in yearly_stats(vols)}
        assert set(stats) == {2023, 2024}
        for year in (2023, 2024):
            sel = [d.vol1 for d in vols.days if d.day.year == year]
            assert stats[year].vol_max == pytest.approx(max(sel), abs=1e-12)
            assert stats[year].vol_mean == pytest.approx(float(np.mean(sel)), abs=1e-12)
            assert stats[year].vol_std == pytest.approx(float(np.std(sel, ddof=1)), abs=1e-12)
            assert stats[year].vol_min == pytest.approx(min(sel), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            yearly_stats(VolSeries(pair="x"))
