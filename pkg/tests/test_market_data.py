import io
import math
import statistics
from datetime import date, timedelta

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptocae.errors import (ConfigurationError, DataError, EmptyUniverseError,
                              InsufficientDataError, ParseError, UndefinedStatisticError)
from cryptocae.market_data import (CoinSeries, DatedSeries, FeatureTensor, PeriodWindow,
                                   PriceRecord, add_months, build_feature_tensor, high_low_ratio,
                                   load_snapshot_dir, log_returns, make_periods, parse_snapshot,
                                   pearson, rolling_volatility, serialize_snapshot)
from cryptocae.synthetic import data_path, load_btc_synth, synthetic_coin


def series_from_closes(closes, start=date(2020, 1, 1), symbol="X"):
    recs = [PriceRecord(start + timedelta(days=i), c, c, c, c, 1.0) for i, c in enumerate(closes)]
    return CoinSeries(symbol, tuple(recs))


# --- parse_snapshot -----------------------------------------------------------

def test_parse_sorts_rows():
    csv_bytes = (b"date,open,high,low,close,volume\n"
                 b"2020-01-03,3,4,2,3,10\n"
                 b"2020-01-01,1,2,1,1.5,10\n"
                 b"2020-01-02,2,3,1,2,10\n")
    s = parse_snapshot(io.BytesIO(csv_bytes), "T")
    assert len(s) == 3
    assert s.dates == [date(2020, 1, 1), date(2020, 1, 2), date(2020, 1, 3)]


def test_parse_high_below_low_names_date():
    text = "date,open,high,low,close,volume\n2020-01-05,6,5,7,6,1\n"
    with pytest.raises(DataError, match="2020-01-05"):
        parse_snapshot(text)


@pytest.mark.parametrize("row,line", [
    ("2020-01-01,1,2,1", 2),
    ("2020-01-01,1,2,x,1,1", 2),
    ("not-a-date,1,2,1,1,1", 2),
])
def test_parse_malformed_rows_report_line(row, line):
    with pytest.raises(ParseError) as exc:
        parse_snapshot("date,open,high,low,close,volume\n" + row + "\n")
    assert exc.value.line == line


def test_parse_duplicate_date():
    text = ("date,open,high,low,close,volume\n"
            "2020-01-01,1,1,1,1,1\n2020-01-01,1,1,1,1,1\n")
    with pytest.raises(DataError, match="duplicate"):
        parse_snapshot(text)


def test_parse_bad_header():
    with pytest.raises(ParseError):
        parse_snapshot("day,o,h,l,c,v\n")


def test_bundled_btc_fixture_row_count():
    raw = data_path("btc_synth.csv").read_text().splitlines()
    assert len(raw) - 1 == 2190
    assert len(load_btc_synth()) == 2190


def test_snapshot_roundtrip_is_exact():
    coin = synthetic_coin("RT", date(2019, 1, 1), 50, seed=5)
    text = serialize_snapshot(coin)
    again = parse_snapshot(text, "RT")
    assert again == coin
    assert serialize_snapshot(again) == text


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 1e6), st.floats(0, 0.5), st.floats(0, 0.5),
                          st.floats(0, 1), st.floats(0, 1e9)), min_size=1, max_size=20))
def test_roundtrip_property(rows):
    recs = []
    for i, (low, up, _, frac, vol) in enumerate(rows):
        high = low * (1 + up)
        o = low + frac * (high - low)
        recs.append(PriceRecord(date(2018, 1, 1) + timedelta(days=i), o, high, low, high, vol))
    series = CoinSeries("P", tuple(recs))
    assert parse_snapshot(serialize_snapshot(series), "P") == series


def test_numpy_scalars_serialize_as_plain_floats():
    rec = PriceRecord(date(2020, 1, 1), *np.array([1.0, 2.0, 0.5, 1.5, 3.0]))
    text = serialize_snapshot(CoinSeries("N", (rec,)))
    assert text.splitlines()[1] == "2020-01-01,1.0,2.0,0.5,1.5,3.0"


def test_load_snapshot_dir_uses_file_stems():
    coins = load_snapshot_dir(data_path("snapshot"))
    assert set(coins) == {"BTC", "LTC", "USDT", "ETH", "BNB", "TRX"}
    assert coins["BTC"].symbol == "BTC"


# --- log_returns / high_low_ratio --------------------------------------------

def test_log_returns_simple_cases():
    assert log_returns(series_from_closes([1.0, math.e])).values == pytest.approx([1.0], abs=1e-15)
    assert list(log_returns(series_from_closes([5, 5, 5])).values) == [0.0, 0.0]


def test_log_returns_against_high_precision():
    expected = float(mpmath.log(mpmath.mpf(110) / 100))
    got = log_returns(series_from_closes([100, 110])).values[0]
    assert got == pytest.approx(expected, abs=1e-15)
    assert got == pytest.approx(0.0953102, abs=1e-7)


def test_log_returns_dates_are_later_day():
    r = log_returns(series_from_closes([1, 2, 3]))
    assert r.dates == (date(2020, 1, 2), date(2020, 1, 3))


def test_log_returns_too_short():
    with pytest.raises(InsufficientDataError):
        log_returns(series_from_closes([1.0]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-3, 1e6), min_size=2, max_size=200))
def test_log_returns_telescope(closes):
    r = log_returns(series_from_closes(closes))
    assert abs(r.values.sum() - math.log(closes[-1] / closes[0])) < 1e-12 * max(1, len(closes) / 50)


def test_high_low_ratio():
    recs = (PriceRecord(date(2020, 1, 1), 10, 10, 10, 10, 0),
            PriceRecord(date(2020, 1, 2), 11, 12, 10, 11, 0))
    r = high_low_ratio(CoinSeries("H", recs))
    assert list(r.values) == [1.0, 1.2]


def test_high_low_ratio_fixture_day_17():
    btc = load_btc_synth()
    rec = btc.records[17]
    assert high_low_ratio(btc).values[17] == rec.high / rec.low
    assert np.all(high_low_ratio(btc).values >= 1.0)


def test_price_record_rejects_nonpositive_low():
    with pytest.raises(DataError):
        PriceRecord(date(2020, 1, 1), 0, 1, 0, 0.5, 1)


# --- make_periods -------------------------------------------------------------

def test_first_period_boundaries():
    (w,) = make_periods(date(2013, 5, 15), 6, 1)
    assert (w.start_date, w.end_date) == (date(2013, 5, 15), date(2013, 11, 15))


def test_twelfth_period_label():
    windows = make_periods(date(2013, 5, 15), 6, 12)
    assert windows[-1].label() == "16/11/2018 -- 15/05/2019"
    assert windows[-3].label() == "16/11/2017 -- 15/05/2018"
    assert windows[-2].label() == "16/05/2018 -- 15/11/2018"


def test_add_months_clamps():
    assert add_months(date(2019, 1, 31), 1) == date(2019, 2, 28)
    assert add_months(date(2020, 1, 31), 1) == date(2020, 2, 29)


def test_make_periods_overflow():
    with pytest.raises(OverflowError):
        make_periods(date(9999, 1, 1), 6, 4)


def test_make_periods_rejects_bad_args():
    with pytest.raises(ConfigurationError):
        make_periods(date(2020, 1, 1), 0, 1)
    with pytest.raises(ConfigurationError):
        make_periods(date(2020, 1, 1), 6, 0)


@settings(max_examples=200, deadline=None)
@given(st.dates(date(1990, 1, 1), date(2100, 12, 31)), st.integers(1, 24), st.integers(1, 30))
def test_periods_partition(anchor, months, count):
    windows = make_periods(anchor, months, count)
    assert windows[0].start_date == anchor
    for a, b in zip(windows, windows[1:]):
        assert b.start_date == a.end_date + timedelta(days=1)
        assert a.end_date > a.start_date
    total = sum(w.n_days for w in windows)
    assert total == (windows[-1].end_date - anchor).days + 1


# --- build_feature_tensor -----------------------------------------------------

@pytest.fixture(scope="module")
def snapshot():
    return load_snapshot_dir(data_path("snapshot"))


def test_tensor_single_coin_shape(snapshot):
    w = make_periods(date(2014, 1, 1), 6, 1)[0]
    t = build_feature_tensor([snapshot["BTC"]], w, ["returns"])
    assert t.data.shape == (1, 192, 1)
    assert t.symbols == ("BTC",)
    assert t.valid_length == w.n_days - 1
    assert np.all(t.data[0, t.valid_length:] == 0.0)


def test_tensor_excludes_mid_window_listing(snapshot):
    # BNB is listed 2017-07-25, inside this window
    w = PeriodWindow(0, date(2017, 5, 16), date(2017, 11, 15))
    t = build_feature_tensor(list(snapshot.values()), w)
    assert "BNB" not in t.symbols
    assert "TRX" not in t.symbols
    assert "BTC" in t.symbols


def test_tensor_normalization(snapshot):
    w = make_periods(date(2013, 5, 15), 6, 12)[11]
    t = build_feature_tensor(list(snapshot.values()), w)
    n = t.valid_length
    for i, sym in enumerate(t.symbols):
        for c, ch in enumerate(t.channels):
            sl = t.data[i, :n, c]
            assert abs(sl.mean()) < 1e-10, (sym, ch)
            if t.norm_params["per_coin"][sym][ch]["std"] > 0:
                assert abs(sl.std(ddof=1) - 1) < 1e-10, (sym, ch)
    assert np.all(np.isfinite(t.data))


def test_tensor_missing_day_disqualifies():
    coin = synthetic_coin("GAP", date(2020, 1, 1), 100, seed=1)
    gappy = CoinSeries("GAP", coin.records[:40] + coin.records[41:])
    w = PeriodWindow(0, date(2020, 1, 10), date(2020, 3, 1))
    with pytest.raises(EmptyUniverseError):
        build_feature_tensor([gappy], w)
    assert build_feature_tensor([coin, gappy], w).symbols == ("GAP",)


def test_tensor_errors(snapshot):
    w = make_periods(date(2013, 5, 15), 6, 1)[0]
    with pytest.raises(ConfigurationError):
        build_feature_tensor([snapshot["BTC"]], w, [])
    with pytest.raises(ConfigurationError):
        build_feature_tensor([snapshot["BTC"]], w, input_length=64)
    early = PeriodWindow(0, date(2010, 1, 1), date(2010, 6, 1))
    with pytest.raises(EmptyUniverseError):
        build_feature_tensor(list(snapshot.values()), early)


def test_tensor_export_roundtrip(tmp_path, snapshot):
    w = make_periods(date(2013, 5, 15), 6, 12)[10]
    t = build_feature_tensor(list(snapshot.values()), w)
    t.write(tmp_path / "t.json", tmp_path / "t.csv")
    back = FeatureTensor.read(tmp_path / "t.json", tmp_path / "t.csv")
    assert back.symbols == t.symbols and back.window == t.window
    assert np.array_equal(back.data, t.data)
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "symbol,day,returns,hl_ratio,volume"


# --- pearson / volatility -----------------------------------------------------

def test_pearson_cases():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    a = np.array([1.0, 5.0, 2.0, 7.0])
    assert pearson(a, -a) == pytest.approx(-1.0)
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)


def test_pearson_zero_variance():
    with pytest.raises(UndefinedStatisticError):
        pearson([1, 1, 1], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_affine_invariance(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 20))
    assert abs(pearson(alpha * a + beta, b) - pearson(a, b)) < 1e-12


def _dated(values):
    return DatedSeries(tuple(date(2020, 1, 1) + timedelta(days=i) for i in range(len(values))),
                       np.asarray(values, dtype=float))


def test_volatility_constant_returns():
    v = rolling_volatility(_dated([0.01] * 40), 30, 365)
    assert len(v) == 11
    assert np.all(np.abs(v.values) < 1e-12)


def test_volatility_alternating():
    values = [0.01 if i % 2 == 0 else -0.01 for i in range(60)]
    v = rolling_volatility(_dated(values), 30, 365)
    expected = statistics.stdev(values[:30]) * math.sqrt(365) * 100
    assert v.values == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(19.43158, abs=1e-5)
    assert v.dates[0] == date(2020, 1, 30)


def test_volatility_too_short():
    with pytest.raises(InsufficientDataError):
        rolling_volatility(_dated([0.01] * 10), 30)
