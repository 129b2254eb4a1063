"""Daily volatility index from minute closes and the blind rolling test.

The daily index is the sample standard deviation (n-1 denominator) of the
day's one-minute log returns scaled by sqrt(1440). Each day is anchored on
the previous day's final close so a complete day contributes exactly 1440
returns; days missing more than the coverage tolerance are excluded and
recorded for audit.

The rolling sweep slides a candidate event day across the series and runs
a two-sided Wilcoxon signed-rank test between the week before and the week
after, paired by offset (one day before with one day after, and so on).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .errors import ValidationError

MINUTES_PER_DAY = 1440


@dataclass
class PriceSeries:
    pair: str
    points: list[tuple[int, float]]  # (minute timestamp ms, close)


@dataclass
class VolDay:
    day: date
    vol1: float
    n_samples: int


@dataclass
class VolSeries:
    pair: str
    days: list[VolDay] = field(default_factory=list)
    excluded: list[tuple[date, int]] = field(default_factory=list)


@dataclass
class WilcoxonResult:
    p_value: float
    h: int
    n_pairs: int
    statistic: float
    method: str
    all_zero: bool = False


@dataclass
class SweepRow:
    event_day: date
    p_value: float
    h: int
    n_pairs: int


@dataclass
class SweepResult:
    rows: list[SweepRow]


@dataclass
class YearStats:
    year: int
    vol_max: float
    vol_mean: float
    vol_std: float
    vol_min: float
    n_days: int
    degenerate: bool = False


def load_candles_csv(path, pair: str = "BTC-USDT") -> PriceSeries:
    """Read minute candles ``timestamp_ms,open,high,low,close,volume``.

    A header row is tolerated. Timestamps must be strictly increasing on
    the minute grid; closes must be positive.
    """
    points: list[tuple[int, float]] = []
    last_ts = None
    with open(path, newline="", encoding="utf-8") as f:
        for row_no, row in enumerate(csv.reader(f), start=1):
            if not row or (row_no == 1 and not row[0].strip().lstrip("-").isdigit()):
                continue
            if len(row) < 5:
                raise ValidationError(f"{path}: row {row_no}: expected 6 candle columns, got {len(row)}")
            try:
                ts = int(row[0])
                close = float(row[4])
            except ValueError as e:
                raise ValidationError(f"{path}: row {row_no}: {e}") from None
            if close <= 0:
                raise ValidationError(f"{path}: row {row_no}: close must be positive, got {close}")
            if last_ts is not None:
                if ts <= last_ts:
                    raise ValidationError(f"{path}: row {row_no}: timestamps must be strictly increasing")
                if (ts - last_ts) % 60_000 != 0:
                    raise ValidationError(f"{path}: row {row_no}: timestamp off the 60 s grid")
            last_ts = ts
            points.append((ts, close))
    return PriceSeries(pair=pair, points=points)


def vol1(prices, expected_samples: int = MINUTES_PER_DAY, min_coverage: float = 0.9) -> float:
    """Volatility index for one day's closes plus the anchoring close.

    ``prices`` holds the previous day's final close followed by the day's
    minute closes, so a complete day passes 1441 prices and yields 1440
    log returns. Partial days above the coverage floor are scaled by the
    square root of the available return count instead.
    """
    arr = np.asarray(prices, dtype=np.float64)
    m = arr.size - 1
    needed = math.ceil(min_coverage * expected_samples)
    if m < max(needed, 2):
        raise ValidationError(
            f"insufficient samples: {m} returns available, need >= {max(needed, 2)} "
            f"({min_coverage:.0%} of {expected_samples})"
        )
    if np.any(arr <= 0):
        raise ValidationError("prices must be positive")
    returns = np.diff(np.log(arr))
    return float(returns.std(ddof=1) * math.sqrt(m))


def _day_of(ts_ms: int) -> date:
    return datetime.fromtimestamp(ts_ms // 1000, tz=timezone.utc).date()


def daily_vol_series(
    series: PriceSeries,
    min_coverage: float = 0.9,
    expected_samples: int = MINUTES_PER_DAY,
) -> VolSeries:
    """Group minute closes by UTC day and compute the index per day.

    The first day (or a day following a calendar gap) has no previous
    close to anchor on and spends its first sample as the anchor.
    """
    out = VolSeries(pair=series.pair)
    if not series.points:
        return out
    by_day: dict[date, list[float]] = {}
    for ts, close in series.points:
        by_day.setdefault(_day_of(ts), []).append(close)
    prev_day: date | None = None
    prev_close: float | None = None
    for day in sorted(by_day):
        closes = by_day[day]
        anchored = prev_close is not None and prev_day == day - timedelta(days=1)
        prices = ([prev_close] if anchored else []) + closes
        try:
            v = vol1(prices, expected_samples=expected_samples, min_coverage=min_coverage)
            out.days.append(VolDay(day=day, vol1=v, n_samples=len(prices) - 1))
        except ValidationError:
            out.excluded.append((day, len(prices) - 1))
        prev_day = day
        prev_close = closes[-1]
    return out


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their rank mean."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_two_sided(rank2: np.ndarray, w2: int) -> float:
    """Exact two-sided p for the signed-rank sum via enumeration counts.

    rank2 holds doubled midranks (integers); under the null every sign
    assignment is equally likely, so the distribution of the doubled
    positive-rank sum is a subset-sum count.
    """
    total_sum = int(rank2.sum())
    counts = [0] * (total_sum + 1)
    counts[0] = 1
    for r in rank2.tolist():
        for s in range(total_sum, r - 1, -1):
            if counts[s - r]:
                counts[s] += counts[s - r]
    denom = 1 << len(rank2)
    cdf = sum(counts[: w2 + 1])
    sf = sum(counts[w2:])
    return min(1.0, 2.0 * min(cdf, sf) / denom)


def _normal_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    """Tie-corrected normal approximation with continuity correction."""
    n = ranks.size
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float((tie_counts.astype(np.float64) ** 3 - tie_counts).sum()) / 48.0
    sd = math.sqrt(var)
    diff = w_plus - mu
    if diff > 0.5:
        diff -= 0.5
    elif diff < -0.5:
        diff += 0.5
    else:
        diff = 0.0
    z = diff / sd
    return math.erfc(abs(z) / math.sqrt(2.0))


EXACT_LIMIT = 25


def wilcoxon_signed_rank(x_b, x_a, alpha: float = 0.05, method: str = "auto") -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped (with n_pairs reduced); the null
    distribution is enumerated exactly up to EXACT_LIMIT non-zero pairs
    and approximated normally above. h = 1 iff p < alpha. When every
    difference is zero the test is undefined and reported as p=1, h=0
    with the all_zero flag set.
    """
    xb = np.asarray(x_b, dtype=np.float64)
    xa = np.asarray(x_a, dtype=np.float64)
    if xb.shape != xa.shape or xb.ndim != 1 or xb.size == 0:
        raise ValidationError("paired samples must be equal-length, non-empty 1-d collections")
    if method not in ("auto", "exact", "normal"):
        raise ValidationError(f"unknown method {method!r}")
    diffs = xb - xa
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(p_value=1.0, h=0, n_pairs=0, statistic=0.0, method="degenerate", all_zero=True)
    ranks = _midranks(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    use_exact = method == "exact" or (method == "auto" and n <= EXACT_LIMIT)
    if use_exact:
        rank2 = np.rint(2.0 * ranks).astype(np.int64)
        p = _exact_two_sided(rank2, int(round(2.0 * w_plus)))
        how = "exact"
    else:
        p = _normal_two_sided(ranks, w_plus)
        how = "normal"
    return WilcoxonResult(p_value=p, h=int(p < alpha), n_pairs=n, statistic=w_plus, method=how)


def rolling_sweep(vols: VolSeries, window: int = 7, alpha: float = 0.05) -> SweepResult:
    """Run the before/after test at every admissible event day.

    For event day D the before sample is (vol[D-1], ..., vol[D-window])
    and the after sample (vol[D+1], ..., vol[D+window]), paired by offset;
    D itself is excluded. Event days whose windows cross a calendar gap
    (an excluded or missing day) are skipped.
    """
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    days = vols.days
    if len(days) < 2 * window + 1:
        raise ValidationError(
            f"series spans {len(days)} usable days, need >= {2 * window + 1} for window {window}"
        )
    rows: list[SweepRow] = []
    for i in range(window, len(days) - window):
        span = days[i - window : i + window + 1]
        if span[-1].day - span[0].day != timedelta(days=2 * window):
            continue
        x_b = [days[i - off].vol1 for off in range(1, window + 1)]
        x_a = [days[i + off].vol1 for off in range(1, window + 1)]
        res = wilcoxon_signed_rank(x_b, x_a, alpha=alpha)
        rows.append(SweepRow(event_day=days[i].day, p_value=res.p_value, h=res.h, n_pairs=res.n_pairs))
    return SweepResult(rows=rows)


def yearly_stats(vols: VolSeries) -> list[YearStats]:
    """Per-calendar-year max/mean/std/min of the daily index."""
    if not vols.days:
        raise ValidationError("no usable days to aggregate")
    by_year: dict[int, list[float]] = {}
    for d in vols.days:
        by_year.setdefault(d.day.year, []).append(d.vol1)
    out = []
    for year in sorted(by_year):
        vals = np.asarray(by_year[year], dtype=np.float64)
        degenerate = vals.size == 1
        out.append(
            YearStats(
                year=year,
                vol_max=float(vals.max()),
                vol_mean=float(vals.mean()),
                vol_std=0.0 if degenerate else float(vals.std(ddof=1)),
                vol_min=float(vals.min()),
                n_days=int(vals.size),
                degenerate=degenerate,
            )
        )
    return out


def vol_rows(vols: VolSeries):
    """CSV rows ``date,vol1,n_samples``."""
    for d in vols.days:
        yield d.day.isoformat(), repr(d.vol1), d.n_samples


def sweep_rows(result: SweepResult):
    """CSV rows ``event_date,p_value,h,n_pairs``."""
    for row in result.rows:
        yield row.event_day.isoformat(), repr(row.p_value), row.h, row.n_pairs


def stats_rows(stats: list[YearStats]):
    """CSV rows ``year,max,mean,std,min``."""
    for s in stats:
        yield s.year, repr(s.vol_max), repr(s.vol_mean), repr(s.vol_std), repr(s.vol_min)
