"""Ljung-Box, Wald-Wolfowitz runs and BDS tests on daily return series.

Default parameterization: Ljung-Box reports the smallest p-value over lags
1..10, the runs test dichotomizes at the sample mean, and BDS averages the
p-values of embedding dimensions 2..5 with epsilon = 2.5 standard deviations.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InsufficientDataError, UndefinedStatisticError
from ..market_data import CoinSeries, PeriodWindow, log_returns
from .special import chi_square_sf, normal_sf

TEST_NAMES = ("ljung_box", "runs", "bds")
MIN_LENGTH = 30
BDS_MIN_LENGTH = 50


@dataclass(frozen=True)
class TestReport:
    test_name: str
    statistic: float
    p_value: float
    params: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    def to_dict(self):
        return {"test_name": self.test_name, "statistic": self.statistic,
                "p_value": self.p_value, "params": self.params}


@dataclass(frozen=True)
class ReturnSample:
    symbol: str
    window: PeriodWindow
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.symbol}: non-finite returns")
        object.__setattr__(self, "values", values)


def _as_series(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D series")
    return x


def autocorrelation(x, lag):
    x = _as_series(x)
    n = len(x)
    if not 1 <= lag < n:
        raise ValueError(f"lag must be in [1, {n - 1}], got {lag}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0:
        raise UndefinedStatisticError("autocorrelation undefined for zero-variance series")
    return float(np.dot(d[:-lag], d[lag:])) / denom


def ljung_box(x, max_lag=10):
    """Ljung-Box Q for lags 1..max_lag; reports the lag with the smallest p-value.

    Ties in the minimum p-value resolve to the smallest lag.
    """
    x = _as_series(x)
    n = len(x)
    if n <= max_lag + 1:
        raise InsufficientDataError(f"Ljung-Box with {max_lag} lags needs more than {max_lag + 1} points")
    q = 0.0
    per_lag = []
    for h in range(1, max_lag + 1):
        rho = autocorrelation(x, h)
        q += rho * rho / (n - h)
        q_h = n * (n + 2) * q
        per_lag.append({"lag": h, "q": q_h, "p_value": chi_square_sf(q_h, h)})
    best = min(per_lag, key=lambda r: r["p_value"])
    return TestReport("ljung_box", best["q"], best["p_value"],
                      {"max_lag": max_lag, "lag": best["lag"], "per_lag": per_lag})


def runs_test(x, cutoff=None):
    """Wald-Wolfowitz runs test around ``cutoff`` (the sample mean by default).

    Values exactly at the cutoff are dropped before counting runs.
    """
    x = _as_series(x)
    if cutoff is None:
        cutoff = float(x.mean())
    signs = np.sign(x - cutoff)
    signs = signs[signs != 0]
    n1 = int(np.sum(signs > 0))
    n2 = int(np.sum(signs < 0))
    if n1 == 0 or n2 == 0:
        raise UndefinedStatisticError("runs test needs values on both sides of the cutoff")
    runs = 1 + int(np.count_nonzero(signs[1:] != signs[:-1]))
    n = n1 + n2
    mean = 2.0 * n1 * n2 / n + 1.0
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1))
    if var <= 0:
        raise UndefinedStatisticError("runs test variance is zero")
    z = (runs - mean) / math.sqrt(var)
    p = min(1.0, 2.0 * normal_sf(abs(z)))
    return TestReport("runs", z, p, {"cutoff": cutoff, "runs": runs, "n_above": n1,
                                      "n_below": n2, "expected_runs": mean, "variance": var})


def _closeness(x, eps):
    return np.abs(x[:, None] - x[None, :]) < eps


def _embedded_closeness(indicators, dim):
    """Pairwise closeness of ``dim``-histories: AND of ``dim`` shifted indicator blocks."""
    n = indicators.shape[0] - dim + 1
    joint = indicators[:n, :n].copy()
    for k in range(1, dim):
        joint &= indicators[k:k + n, k:k + n]
    return joint


def _pair_fraction(joint):
    n = joint.shape[0]
    pairs = int(np.count_nonzero(np.triu(joint, 1)))
    return pairs / (n * (n - 1) // 2)


def correlation_integral(x, dim, eps):
    """Fraction of pairs i < j of ``dim``-histories within sup-norm distance < eps."""
    x = _as_series(x)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if len(x) < dim + 1:
        raise InsufficientDataError(f"need at least {dim + 1} points for dimension {dim}")
    return _pair_fraction(_embedded_closeness(_closeness(x, eps), dim))


def _bds_variance(c1, k, m):
    mid = sum(k ** (m - j) * c1 ** (2 * j) for j in range(1, m))
    return 4.0 * (k ** m + 2.0 * mid + (m - 1) ** 2 * c1 ** (2 * m) - m * m * k * c1 ** (2 * m - 2))


def bds_test(x, dims=(2, 3, 4, 5), distance_mult=2.5):
    """BDS test of serial independence, averaging two-sided p-values over ``dims``.

    For each dimension m the statistic is
    sqrt(N) * (C_m - C_1**m) / sigma_m with N = n - m + 1 histories, where
    C_1 is taken over the same last N observations and sigma_m is the
    asymptotic standard error built from the full-sample C_1 and the triple
    closeness moment k.
    """
    x = _as_series(x)
    n = len(x)
    if n < BDS_MIN_LENGTH:
        raise InsufficientDataError(f"BDS needs at least {BDS_MIN_LENGTH} points, got {n}")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        raise UndefinedStatisticError("BDS undefined for zero-variance series")
    eps = distance_mult * sd
    ind = _closeness(x, eps)
    row = ind.sum(axis=1, dtype=np.int64)
    total = int(row.sum())
    k = (float(np.dot(row, row)) - 3.0 * total + 2.0 * n) / (n * (n - 1) * (n - 2))
    c1_full = _pair_fraction(ind)

    per_dim = []
    for m in dims:
        if m < 2 or m >= n:
            raise ValueError(f"embedding dimension must be in [2, {n - 1}], got {m}")
        c_m = _pair_fraction(_embedded_closeness(ind, m))
        c_1 = _pair_fraction(ind[m - 1:, m - 1:])
        var = _bds_variance(c1_full, k, m)
        if var <= 0:
            raise UndefinedStatisticError(f"BDS variance is not positive for dimension {m}")
        stat = math.sqrt(n - m + 1) * (c_m - c_1 ** m) / math.sqrt(var)
        per_dim.append({"dim": m, "statistic": stat, "p_value": min(1.0, 2.0 * normal_sf(abs(stat))),
                        "c_m": c_m, "c_1": c_1})
    mean_p = float(np.mean([d["p_value"] for d in per_dim]))
    mean_stat = float(np.mean([d["statistic"] for d in per_dim]))
    return TestReport("bds", mean_stat, mean_p,
                      {"epsilon": eps, "distance_mult": distance_mult, "k": k,
                       "c1_full": c1_full, "per_dim": per_dim})


@dataclass
class EfficiencyRow:
    symbol: str
    window: PeriodWindow
    reports: dict | None  # test name -> TestReport, None when unavailable
    reason: str = ""
    errors: dict = field(default_factory=dict)

    @property
    def available(self):
        return self.reports is not None


@dataclass
class EfficiencyTable:
    rows: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["symbol", "period_start", "period_end", "lb_p", "runs_p", "bds_p"])
        for r in self.rows:
            cells = []
            for name in TEST_NAMES:
                rep = (r.reports or {}).get(name)
                cells.append("--" if rep is None else f"{rep.p_value:.2f}")
            w.writerow([r.symbol, r.window.start_date.isoformat(), r.window.end_date.isoformat(),
                        *cells])
        return buf.getvalue()

    def to_json(self):
        rows = []
        for r in self.rows:
            rows.append({
                "symbol": r.symbol, "window": r.window.to_dict(), "available": r.available,
                "reason": r.reason, "errors": r.errors,
                "reports": None if r.reports is None else
                {k: v.to_dict() for k, v in r.reports.items()},
            })
        return json.dumps({"rows": rows}, indent=2, sort_keys=True)

    def cell(self, symbol, window_index, test_name):
        for r in self.rows:
            if r.symbol == symbol and r.window.index == window_index:
                return None if r.reports is None else r.reports.get(test_name)
        raise KeyError((symbol, window_index))


def efficiency_table(samples: Sequence[ReturnSample | tuple], max_lag=10, dims=(2, 3, 4, 5),
                     distance_mult=2.5, min_length=MIN_LENGTH) -> EfficiencyTable:
    """Run the three tests on every sample; short or missing samples become unavailable rows.

    A sample may also be given as ``(symbol, window, None)`` to record a coin
    with no data in the window.  Rows are ordered by (window start, symbol
    input order).
    """
    table = EfficiencyTable()
    for s in samples:
        symbol, window, values = (s.symbol, s.window, s.values) if isinstance(s, ReturnSample) else s
        if values is None or len(values) < max(min_length, BDS_MIN_LENGTH, max_lag + 2):
            n = 0 if values is None else len(values)
            table.rows.append(EfficiencyRow(symbol, window, None, f"insufficient coverage ({n} returns)"))
            continue
        reports, errors = {}, {}
        runners = {"ljung_box": lambda v: ljung_box(v, max_lag),
                   "runs": runs_test,
                   "bds": lambda v: bds_test(v, dims, distance_mult)}
        for name in TEST_NAMES:
            try:
                reports[name] = runners[name](values)
            except (UndefinedStatisticError, InsufficientDataError) as exc:
                errors[name] = str(exc)
        table.rows.append(EfficiencyRow(symbol, window, reports, errors=errors))
    table.rows.sort(key=lambda r: r.window.start_date)
    return table


def window_returns(series: CoinSeries, window: PeriodWindow) -> np.ndarray | None:
    """Log returns dated inside ``window``, or None when the coin has none there.

    The first return may use the close of the day before the window.
    """
    if len(series) < 2:
        return None
    r = log_returns(series)
    vals = [v for d, v in zip(r.dates, r.values) if window.start_date <= d <= window.end_date]
    return np.array(vals) if vals else None


def return_samples(coins: Sequence[CoinSeries], windows: Sequence[PeriodWindow]):
    """``(symbol, window, returns-or-None)`` triples for every coin/window pair."""
    return [(c.symbol, w, window_returns(c, w)) for w in windows for c in coins]
