import itertools
import json
import math
from datetime import date

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.diagnostic import acorr_ljungbox
from statsmodels.tsa.stattools import bds as sm_bds

from cryptocae.efficiency import (ReturnSample, bds_test, chi_square_sf, correlation_integral,
                                  efficiency_table, gammaincc, ljung_box, normal_sf,
                                  return_samples, runs_test, window_returns)
from cryptocae.errors import InsufficientDataError, UndefinedStatisticError
from cryptocae.market_data import PeriodWindow, load_snapshot_dir, make_periods
from cryptocae.synthetic import data_path


def logistic_map(n, r=4.0, x0=0.1):
    out = np.empty(n)
    x = x0
    for i in range(n):
        x = r * x * (1 - x)
        out[i] = x
    return out


# --- special functions --------------------------------------------------------

@pytest.mark.parametrize("a,x", [(0.5, 0.1), (0.5, 3.0), (1.0, 1.0), (2.5, 0.7), (5.0, 5.0),
                                 (5.0, 20.0), (10.0, 3.0), (30.0, 25.0), (50.0, 80.0)])
def test_gammaincc_against_mpmath(a, x):
    ref = float(mpmath.gammainc(a, x, mpmath.inf, regularized=True))
    assert gammaincc(a, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_chi_square_critical_value():
    assert abs(chi_square_sf(18.307, 10) - 0.05) < 1e-4
    assert chi_square_sf(0.0, 3) == 1.0
    assert chi_square_sf(2.0, 2) == pytest.approx(math.exp(-1.0), rel=1e-14)


@pytest.mark.parametrize("z", [0.0, 0.5, 1.96, 3.0, 8.0, -1.0])
def test_normal_sf_against_mpmath(z):
    ref = float(mpmath.ncdf(-z))
    assert normal_sf(z) == pytest.approx(ref, rel=1e-13)


# --- runs test ----------------------------------------------------------------

def closed_form_runs(signs):
    """z from the Wald-Wolfowitz moments, counting runs with groupby."""
    runs = sum(1 for _ in itertools.groupby(signs))
    n1 = sum(1 for s in signs if s > 0)
    n2 = len(signs) - n1
    n = n1 + n2
    mu = 2 * n1 * n2 / n + 1
    var = 2 * n1 * n2 * (2 * n1 * n2 - n) / (n ** 2 * (n - 1))
    return (runs - mu) / math.sqrt(var), runs


RUN_FIXTURES = [
    "+-+-+-+-+-", "++++-----", "+-+-+-+-+-+-+-+-+-+-", "+++---+++---", "++--++--++--++",
    "+--+--+--+--", "++++++++--", "+-++-+++-++++-", "--+--+--+--+--+", "+++++-----+++++-----",
    "+-+--", "++-", "+-+", "-++-", "+--+-++-+",
    "+++++++++++-+", "+-+-+-++++----", "-+-+---+++-", "++-+-+--+-++-+-", "+++-+++-+++-+++-",
]


@pytest.mark.parametrize("pattern", RUN_FIXTURES)
def test_runs_z_matches_closed_form(pattern):
    signs = [1 if c == "+" else -1 for c in pattern]
    z, runs = closed_form_runs(signs)
    report = runs_test(np.array(signs, dtype=float), cutoff=0.0)
    assert report.params["runs"] == runs
    assert report.statistic == pytest.approx(z, abs=1e-12)
    assert report.p_value == pytest.approx(2 * float(mpmath.ncdf(-abs(z))), abs=1e-12)


def test_runs_drops_ties_and_handles_degenerate_input():
    r = runs_test(np.array([1.0, 0.0, -1.0, 0.0, 1.0, -1.0]), cutoff=0.0)
    assert r.params["runs"] == 4 and r.params["n_above"] == 2
    with pytest.raises(UndefinedStatisticError):
        runs_test(np.ones(10))


# --- Ljung-Box ----------------------------------------------------------------

def direct_q(x, h):
    n = len(x)
    d = x - x.mean()
    denom = np.sum(d * d)
    return n * (n + 2) * sum((np.sum(d[:-k] * d[k:]) / denom) ** 2 / (n - k) for k in range(1, h + 1))


@pytest.mark.parametrize("seed", range(5))
def test_ljung_box_matches_direct_formula_and_statsmodels(seed):
    x = np.random.default_rng(seed).standard_t(4, size=300)
    rep = ljung_box(x, 10)
    sm = acorr_ljungbox(x, lags=10)
    for row in rep.params["per_lag"]:
        h = row["lag"]
        assert abs(row["q"] - direct_q(x, h)) < 1e-10
        assert row["q"] == pytest.approx(sm["lb_stat"].iloc[h - 1], rel=1e-12)
        assert row["p_value"] == pytest.approx(sm["lb_pvalue"].iloc[h - 1], rel=1e-9, abs=1e-15)
    assert rep.p_value == min(r["p_value"] for r in rep.params["per_lag"])


def test_ljung_box_detects_ar1():
    rng = np.random.default_rng(1)
    e = rng.normal(size=500)
    x = np.zeros(500)
    for t in range(1, 500):
        x[t] = 0.6 * x[t - 1] + e[t]
    assert ljung_box(x).p_value < 1e-10


def test_ljung_box_short_series():
    with pytest.raises(InsufficientDataError):
        ljung_box(np.arange(11.0), 10)


# --- correlation integral / BDS -----------------------------------------------

def naive_correlation_integral(x, dim, eps):
    n = len(x) - dim + 1
    emb = np.array([x[i:i + dim] for i in range(n)])
    count = 0
    for i in range(n):
        count += int(np.sum(np.max(np.abs(emb[i + 1:] - emb[i]), axis=1) < eps))
    return count / (n * (n - 1) / 2)


@pytest.mark.parametrize("seed", range(10))
def test_correlation_integral_equals_naive_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 300))
    x = rng.normal(size=n)
    dim = int(rng.integers(1, 6))
    eps = float(rng.uniform(0.3, 2.0))
    assert correlation_integral(x, dim, eps) == naive_correlation_integral(x, dim, eps)


@pytest.mark.parametrize("seed", range(5))
def test_bds_matches_statsmodels(seed):
    x = np.random.default_rng(seed).normal(size=400)
    rep = bds_test(x, (2, 3, 4, 5), 2.5)
    stats, pvals = sm_bds(x, max_dim=5, distance=2.5)
    for d, s, p in zip(rep.params["per_dim"], stats, pvals):
        assert d["statistic"] == pytest.approx(s, rel=1e-9, abs=1e-12)
        assert d["p_value"] == pytest.approx(p, rel=1e-9, abs=1e-15)


def test_bds_rejects_chaos():
    assert bds_test(logistic_map(1000)).p_value < 0.01


def test_bds_errors():
    with pytest.raises(InsufficientDataError):
        bds_test(np.random.default_rng(0).normal(size=40))
    with pytest.raises(UndefinedStatisticError):
        bds_test(np.zeros(100))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.125, 0.5, 2.0, 64.0]))
def test_bds_scale_invariance(seed, scale):
    # power-of-two scaling is exact in floating point, so every closeness bit is preserved
    x = np.random.default_rng(seed).normal(size=120)
    a, b = bds_test(x), bds_test(scale * x)
    assert a.statistic == b.statistic and a.p_value == b.p_value


# --- table --------------------------------------------------------------------

def test_table_marks_unavailable_coins():
    coins = load_snapshot_dir(data_path("snapshot"))
    windows = [PeriodWindow(0, date(2017, 5, 16), date(2017, 11, 15)),
               PeriodWindow(1, date(2017, 11, 16), date(2018, 5, 15))]
    order = ["BTC", "BNB", "TRX"]
    table = efficiency_table(return_samples([coins[s] for s in order], windows))
    lines = table.to_csv().splitlines()
    assert lines[0] == "symbol,period_start,period_end,lb_p,runs_p,bds_p"
    assert [ln.split(",")[0] for ln in lines[1:]] == order * 2
    # TRX lists on 2017-09-13: 63 returns in the first window, enough for every test
    assert table.cell("TRX", 0, "bds") is not None
    assert table.cell("BTC", 1, "runs").p_value == table.rows[3].reports["runs"].p_value
    for ln in lines[1:]:
        for cell in ln.split(",")[3:]:
            assert cell == "--" or (len(cell) == 4 and 0 <= float(cell) <= 1)


def test_table_short_and_missing_rows():
    w = make_periods(date(2018, 1, 1), 6, 1)[0]
    rng = np.random.default_rng(0)
    samples = [ReturnSample("OK", w, rng.normal(size=180)),
               ("SHORT", w, rng.normal(size=20)),
               ("NONE", w, None)]
    table = efficiency_table(samples)
    assert table.cell("OK", 0, "ljung_box") is not None
    assert table.cell("SHORT", 0, "bds") is None
    assert table.cell("NONE", 0, "runs") is None
    assert table.to_csv().splitlines()[3] == "NONE,2018-01-01,2018-07-01,--,--,--"
    data = json.loads(table.to_json())
    assert [r["available"] for r in data["rows"]] == [True, False, False]


def test_window_returns_uses_prior_close():
    coins = load_snapshot_dir(data_path("snapshot"), ["BTC"])
    w = PeriodWindow(0, date(2014, 1, 1), date(2014, 1, 31))
    r = window_returns(coins["BTC"], w)
    assert len(r) == 31
    closes = coins["BTC"].between(date(2013, 12, 31), date(2014, 1, 31)).column("close")
    assert np.allclose(r, np.diff(np.log(closes)), atol=1e-15)
    assert window_returns(coins["BTC"], PeriodWindow(0, date(2010, 1, 1), date(2010, 2, 1))) is None
